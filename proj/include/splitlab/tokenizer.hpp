#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "splitlab/tensor.hpp"

namespace splitlab {

// Word-level tokenizer: alphanumeric runs are words, punctuation chars are
// single tokens, whitespace separates. Vocabulary built from a corpus by
// frequency, capped at V-2, plus <unk> (id 0) and <pad> (id 1).
class Tokenizer {
 public:
  static constexpr int kUnkId = 0;
  static constexpr int kPadId = 1;

  static Tokenizer build(const std::vector<std::string>& corpus,
                         std::size_t vocab_size);
  static std::vector<std::string> split(const std::string& text);

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  std::size_t vocab_size() const { return vocab_.size(); }
  const std::vector<std::string>& vocab() const { return vocab_; }

  void save(const std::string& path) const;
  static Tokenizer load(const std::string& path);

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  void rebuild_index();
};

}  // namespace splitlab
