#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "splitlab/harness.hpp"
#include "splitlab/report.hpp"

using namespace splitlab;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const char* name) {
  return (fs::temp_directory_path() / name).string();
}

std::string write_temp(const char* name, const std::string& content) {
  std::string path = temp_path(name);
  write_text_file(path, content);
  return path;
}

ExperimentConfig tiny_experiment(const std::string& corpus,
                                 const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.model.vocab_size = 16;
  cfg.model.hidden_dim = 8;
  cfg.model.num_blocks = 2;
  cfg.model.split_point = 1;
  cfg.model.num_heads = 2;
  cfg.model.ffn_dim = 8;
  cfg.model.max_seq_len = 6;
  cfg.model.seed = 3;
  cfg.corpus_path = corpus;
  cfg.prompt_count = 2;
  cfg.max_prompt_len = 3;
  cfg.attack.iterations = 60;
  cfg.seed = 11;
  cfg.output_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_CASE("load_corpus reads text lines and skips blanks") {
  std::string path = write_temp(
      "splitlab_corpus_ok.jsonl",
      "{\"text\": \"the cat sat\"}\n\n{\"text\": \"a dog ran\"}\n");
  std::vector<std::string> lines = load_corpus(path);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "the cat sat");
  CHECK(lines[1] == "a dog ran");
  fs::remove(path);
}

TEST_CASE("load_corpus reports malformed lines by number") {
  std::string path = write_temp("splitlab_corpus_bad.jsonl",
                                "{\"text\": \"fine\"}\nnot json at all\n");
  try {
    load_corpus(path);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::string missing_field = write_temp("splitlab_corpus_nofield.jsonl",
                                         "{\"body\": \"wrong key\"}\n");
  CHECK_THROWS_AS(load_corpus(missing_field), Error);
  CHECK_THROWS_AS(load_corpus(temp_path("splitlab_no_such.jsonl")), Error);
  fs::remove(path);
  fs::remove(missing_field);
}

TEST_CASE("kv config parsing with sections and comments") {
  KvConfig kv = parse_kv_text(
      "# experiment setup\n"
      "[model]\n"
      "vocab_size = 16\n"
      "hidden_dim=8\n"
      "\n"
      "[experiment]\n"
      "prompts = 5   # trailing comment\n"
      "seed = 42\n");
  CHECK(kv.at("model").at("vocab_size") == "16");
  CHECK(kv.at("model").at("hidden_dim") == "8");
  CHECK(kv.at("experiment").at("prompts") == "5");
  CHECK(kv.at("experiment").at("seed") == "42");
}

TEST_CASE("config_from_kv applies values and rejects unknown keys") {
  KvConfig kv;
  kv["model"]["vocab_size"] = "24";
  kv["model"]["split_point"] = "1";
  kv["attack"]["iterations"] = "99";
  kv["experiment"]["prompt_count"] = "7";
  kv["experiment"]["seed"] = "5";
  ExperimentConfig cfg = config_from_kv(kv);
  CHECK(cfg.model.vocab_size == 24);
  CHECK(cfg.model.split_point == 1);
  CHECK(cfg.attack.iterations == 99);
  CHECK(cfg.prompt_count == 7);
  CHECK(cfg.seed == 5);

  KvConfig bad = kv;
  bad["experiment"]["promts"] = "7";  // typo must not pass silently
  CHECK_THROWS_AS(config_from_kv(bad), Error);
  KvConfig bad_section = kv;
  bad_section["modell"]["vocab_size"] = "8";
  CHECK_THROWS_AS(config_from_kv(bad_section), Error);
}

TEST_CASE("defense specs parse from labels") {
  DefenseSpec g = defense_spec_from_string("gaussian:0.001");
  CHECK(g.kind == DefenseKind::Gaussian);
  CHECK(g.variance == 0.001);
  CHECK(g.label() == "gaussian:0.001");

  DefenseSpec p = defense_spec_from_string("pripert-l2:0.5");
  CHECK(p.kind == DefenseKind::PripertL2);
  CHECK(p.budget == 0.5);

  DefenseSpec e = defense_spec_from_string("element-sparsify:0.3");
  CHECK(e.kind == DefenseKind::ElementSparsify);
  CHECK(e.ratio == 0.3);

  CHECK(defense_spec_from_string("none").kind == DefenseKind::None);
  CHECK_THROWS_AS(defense_spec_from_string("none:0.5"), Error);
  CHECK_THROWS_AS(defense_spec_from_string("gaussian"), Error);
  CHECK_THROWS_AS(defense_spec_from_string("warp:1"), Error);
}

TEST_CASE("default defense grid covers every kind and level") {
  std::vector<DefenseSpec> grid = default_defense_grid();
  CHECK(grid.size() == 26);  // none + 5 levels x 5 kinds
  CHECK(grid[0].kind == DefenseKind::None);
  std::size_t gaussian = 0, pripert = 0;
  for (const DefenseSpec& d : grid) {
    if (d.kind == DefenseKind::Gaussian) ++gaussian;
    if (d.kind == DefenseKind::PripertL2) ++pripert;
  }
  CHECK(gaussian == 5);
  CHECK(pripert == 5);
}

TEST_CASE("csv round trip preserves quoting") {
  CsvTable table;
  table.header = {"name", "value"};
  table.rows = {{"plain", "1"},
                {"comma, field", "2"},
                {"quote \" inside", "3"},
                {"multi\nline", "4"}};
  std::string path = temp_path("splitlab_test.csv");
  write_csv(path, table);
  CsvTable back = read_csv(path);
  CHECK(back.header == table.header);
  CHECK(back.rows == table.rows);
  fs::remove(path);
}

TEST_CASE("csv reader rejects ragged rows with a line number") {
  std::string path =
      write_temp("splitlab_ragged.csv", "a,b\n1,2\n3\n");
  try {
    read_csv(path);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("format_double survives a parse round trip") {
  for (double v : {1.0 / 3.0, 1e-300, 1.7976931348623157e308, -0.0, 2.5,
                   6.02214076e23}) {
    std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("bar chart svg is its own machine-readable record") {
  BarChart chart;
  chart.title = "recovery by defense";
  chart.labels = {"none", "gaussian:0.1", "pripert-l2:0.5"};
  chart.values = {0.91, 0.42, 0.07};
  std::string path = temp_path("splitlab_chart.svg");
  write_bar_chart_svg(path, chart);
  BarChart back = read_bar_chart_svg(path);
  CHECK(back.title == chart.title);
  CHECK(back.labels == chart.labels);
  REQUIRE(back.values.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back.values[i] == chart.values[i]);
  fs::remove(path);
}

TEST_CASE("fnv1a matches published vectors") {
  CHECK(fnv1a("") == 14695981039346656037ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
  std::string path = write_temp("splitlab_hash.bin", "foobar");
  CHECK(fnv1a_file(path) == 0x85944171f73967e8ULL);
  fs::remove(path);
}

TEST_CASE("summarize groups by cell and skips error rows") {
  std::vector<ResultRow> rows(3);
  rows[0] = {0, "none", 2, 100.0, 100.0, 1.0, 0.0, ""};
  rows[1] = {1, "none", 2, 50.0, 60.0, 0.5, 0.1, ""};
  rows[2] = {2, "none", 2, 0.0, 0.0, 0.0, 0.0, "diverged"};
  std::vector<SummaryRow> sum = summarize(rows);
  REQUIRE(sum.size() == 1);
  CHECK(sum[0].count == 2);
  CHECK(sum[0].precision_mean == doctest::Approx(75.0));
  CHECK(sum[0].recall_mean == doctest::Approx(80.0));
  CHECK(sum[0].rouge_mean == doctest::Approx(0.75));
  // Sample standard deviation with n-1: |100-50|/sqrt(2).
  CHECK(sum[0].precision_std == doctest::Approx(50.0 / std::sqrt(2.0)));

  rows[2].error.clear();
  rows[2].defense = "gaussian:0.1";
  std::vector<SummaryRow> two = summarize(rows);
  REQUIRE(two.size() == 2);
  CHECK(two[0].defense == "none");  // first-appearance order
  CHECK(two[1].defense == "gaussian:0.1");
  CHECK(two[1].count == 1);
  CHECK(two[1].precision_std == 0.0);
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
  std::vector<int> hits(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 2,
                               [](std::size_t i) {
                                 if (i == 7) throw Error("boom");
                               }),
                  Error);
  parallel_for(0, 2, [](std::size_t) { FAIL("no items, no calls"); });
}

TEST_CASE("environment seed override") {
  ExperimentConfig cfg;
  cfg.seed = 1;
  apply_env_seed(cfg);
  CHECK(cfg.seed == 1);
  CHECK(!cfg.seed_from_env);
  setenv("SPLITLEAK_SEED", "4242", 1);
  apply_env_seed(cfg);
  CHECK(cfg.seed == 4242);
  CHECK(cfg.seed_from_env);
  unsetenv("SPLITLEAK_SEED");
}

TEST_CASE("config validation rejects missing paths") {
  ExperimentConfig cfg = tiny_experiment(temp_path("splitlab_absent.jsonl"),
                                         temp_path("splitlab_out_v"));
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("attack suite replays byte for byte") {
  std::string corpus = write_temp(
      "splitlab_corpus_replay.jsonl",
      "{\"text\": \"the cat sat on the mat\"}\n"
      "{\"text\": \"a dog ran far\"}\n"
      "{\"text\": \"the dog sat\"}\n");
  std::string out_a = temp_path("splitlab_replay_a");
  std::string out_b = temp_path("splitlab_replay_b");
  fs::remove_all(out_a);
  fs::remove_all(out_b);

  SuiteResult a = run_attack_suite(tiny_experiment(corpus, out_a));
  SuiteResult b = run_attack_suite(tiny_experiment(corpus, out_b));
  CHECK(read_text_file(a.results_csv) == read_text_file(b.results_csv));
  CHECK(read_text_file(a.summary_csv) == read_text_file(b.summary_csv));
  CHECK(fs::exists(a.timing_csv));
  CHECK(fs::exists(a.manifest_path));
  CHECK(crosscheck_summary(a.results_csv, a.summary_csv));

  // A different seed must change the per-sample work streams.
  std::string out_c = temp_path("splitlab_replay_c");
  fs::remove_all(out_c);
  ExperimentConfig other = tiny_experiment(corpus, out_c);
  other.seed = 12;
  SuiteResult c = run_attack_suite(other);
  CHECK(read_text_file(a.manifest_path) != read_text_file(c.manifest_path));

  fs::remove(corpus);
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  fs::remove_all(out_c);
}

TEST_CASE("crosscheck fails when the summary is tampered with") {
  std::string corpus = write_temp("splitlab_corpus_tamper.jsonl",
                                  "{\"text\": \"the cat sat\"}\n"
                                  "{\"text\": \"a dog ran\"}\n");
  std::string out = temp_path("splitlab_tamper_out");
  fs::remove_all(out);
  SuiteResult res = run_attack_suite(tiny_experiment(corpus, out));
  CsvTable sum = read_csv(res.summary_csv);
  REQUIRE(!sum.rows.empty());
  std::size_t rouge_col = 0;
  for (std::size_t c = 0; c < sum.header.size(); ++c)
    if (sum.header[c] == "rouge_mean") rouge_col = c;
  sum.rows[0][rouge_col] = "99.5";
  write_csv(res.summary_csv, sum);
  CHECK(!crosscheck_summary(res.results_csv, res.summary_csv));
  fs::remove(corpus);
  fs::remove_all(out);
}
