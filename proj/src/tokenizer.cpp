#include "splitlab/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include <json.hpp>

namespace splitlab {

std::vector<std::string> Tokenizer::split(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(ch));
    } else {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
      if (!std::isspace(ch)) out.push_back(std::string(1, static_cast<char>(ch)));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus,
                           std::size_t vocab_size) {
  require(vocab_size >= 2, "tokenizer: vocabulary must hold unk and pad");
  std::map<std::string, std::size_t> counts;  // ordered map: deterministic ties
  for (const std::string& line : corpus)
    for (const std::string& tok : split(line)) counts[tok]++;
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(),
                                                         counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Tokenizer t;
  t.vocab_.push_back("<unk>");
  t.vocab_.push_back("<pad>");
  for (const auto& [word, count] : items) {
    if (t.vocab_.size() >= vocab_size) break;
    t.vocab_.push_back(word);
  }
  t.rebuild_index();
  return t;
}

void Tokenizer::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < vocab_.size(); ++i)
    index_[vocab_[i]] = static_cast<int>(i);
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const std::string& tok : split(text)) {
    auto it = index_.find(tok);
    ids.push_back(it == index_.end() ? kUnkId : it->second);
  }
  return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    require(id >= 0 && static_cast<std::size_t>(id) < vocab_.size(),
            "tokenizer: id out of range");
    if (!out.empty()) out.push_back(' ');
    out += vocab_[static_cast<std::size_t>(id)];
  }
  return out;
}

void Tokenizer::save(const std::string& path) const {
  nlohmann::json j;
  j["vocab"] = vocab_;
  std::ofstream f(path);
  require(f.good(), "tokenizer: cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
}

Tokenizer Tokenizer::load(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "tokenizer: cannot open " + path);
  nlohmann::json j;
  f >> j;
  Tokenizer t;
  t.vocab_ = j.at("vocab").get<std::vector<std::string>>();
  require(t.vocab_.size() >= 2, "tokenizer: corrupt vocabulary file");
  t.rebuild_index();
  return t;
}

}  // namespace splitlab
