#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "splitlab/harness.hpp"
#include "splitlab/report.hpp"

namespace fs = std::filesystem;
using namespace splitlab;

namespace {

struct CliOverrides {
  std::string config_file;
  std::string corpus, checkpoint, out_dir;
  std::uint64_t seed = 0;
  std::size_t prompts = 0, max_len = 0, train_steps = 0;
  std::size_t iterations = 0, restarts = 0, workers = 0;
  std::size_t paf_draws = 0, timing_trials = 0;
  double lr = 0.0;
  std::string distance, q1_list;
  std::vector<std::string> defenses;
  std::size_t vocab = 0, hidden = 0, blocks = 0, split = static_cast<std::size_t>(-1);
  std::size_t heads = 0, ffn = 0, seq = 0;
};

void add_common(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_file, "key-value config file");
  cmd->add_option("--corpus", o.corpus, "JSONL corpus path");
  cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint path");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "experiment seed");
  cmd->add_option("--prompts", o.prompts, "prompt count");
  cmd->add_option("--max-len", o.max_len, "max prompt length");
  cmd->add_option("--train-steps", o.train_steps, "toy training steps");
  cmd->add_option("--iterations", o.iterations, "attack iterations");
  cmd->add_option("--lr", o.lr, "attack learning rate");
  cmd->add_option("--restarts", o.restarts, "attack restarts");
  cmd->add_option("--distance", o.distance, "attack distance: cosine|euclidean");
  cmd->add_option("--defense", o.defenses,
                  "defense spec kind:param (repeatable)");
  cmd->add_option("--q1", o.q1_list, "comma-separated Q1 sweep");
  cmd->add_option("--paf-draws", o.paf_draws, "Monte Carlo draws per input");
  cmd->add_option("--timing-trials", o.timing_trials, "timing trials");
  cmd->add_option("--workers", o.workers, "worker thread count");
  cmd->add_option("--vocab-size", o.vocab, "model vocab size");
  cmd->add_option("--hidden-dim", o.hidden, "model hidden dim");
  cmd->add_option("--num-blocks", o.blocks, "model block count");
  cmd->add_option("--split-point", o.split, "client-side block count Q1");
  cmd->add_option("--num-heads", o.heads, "attention heads");
  cmd->add_option("--ffn-dim", o.ffn, "FFN width");
  cmd->add_option("--max-seq-len", o.seq, "model max sequence length");
}

ExperimentConfig resolve(const CLI::App* cmd, const CliOverrides& o) {
  ExperimentConfig cfg;
  if (cmd->count("--config")) cfg = config_from_kv(parse_kv_file(o.config_file));
  auto set = [&](const char* flag) { return cmd->count(flag) > 0; };
  if (set("--corpus")) cfg.corpus_path = o.corpus;
  if (set("--checkpoint")) cfg.checkpoint_path = o.checkpoint;
  if (set("--out-dir")) cfg.output_dir = o.out_dir;
  if (set("--seed")) cfg.seed = o.seed;
  if (set("--prompts")) cfg.prompt_count = o.prompts;
  if (set("--max-len")) cfg.max_prompt_len = o.max_len;
  if (set("--train-steps")) cfg.train_steps = o.train_steps;
  if (set("--iterations")) cfg.attack.iterations = o.iterations;
  if (set("--lr")) cfg.attack.learning_rate = o.lr;
  if (set("--restarts")) cfg.attack.restarts = o.restarts;
  if (set("--distance")) cfg.attack.distance = distance_kind_from_name(o.distance);
  if (set("--paf-draws")) cfg.paf_draws = o.paf_draws;
  if (set("--timing-trials")) cfg.timing_trials = o.timing_trials;
  if (set("--workers")) cfg.workers = o.workers;
  if (set("--vocab-size")) cfg.model.vocab_size = o.vocab;
  if (set("--hidden-dim")) cfg.model.hidden_dim = o.hidden;
  if (set("--num-blocks")) cfg.model.num_blocks = o.blocks;
  if (set("--split-point")) cfg.model.split_point = o.split;
  if (set("--num-heads")) cfg.model.num_heads = o.heads;
  if (set("--ffn-dim")) cfg.model.ffn_dim = o.ffn;
  if (set("--max-seq-len")) cfg.model.max_seq_len = o.seq;
  if (set("--defense")) {
    cfg.defenses.clear();
    for (const std::string& d : o.defenses)
      cfg.defenses.push_back(defense_spec_from_string(d));
  }
  if (set("--q1")) {
    cfg.q1_sweep.clear();
    std::string cur;
    for (char c : o.q1_list + ",") {
      if (c == ',') {
        if (!cur.empty()) cfg.q1_sweep.push_back(std::stoull(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
  }
  apply_env_seed(cfg);
  return cfg;
}

void save_model_artifacts(const ExperimentConfig& cfg, const Workspace& ws,
                          const std::string& out_path) {
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(out_path).parent_path());
  save_checkpoint(ws.model, out_path);
  ws.tokenizer.save(out_path + ".tokenizer.json");
  std::printf("wrote %s (+ tokenizer sidecar)\n", out_path.c_str());
}

int run_report(const std::string& dir) {
  std::string results = (fs::path(dir) / "results.csv").string();
  std::string summary = (fs::path(dir) / "summary.csv").string();
  if (!crosscheck_summary(results, summary)) {
    std::fprintf(stderr, "summary cross-check FAILED for %s\n", dir.c_str());
    return 2;
  }
  std::printf("summary cross-check ok\n");
  CsvTable sum = read_csv(summary);
  std::size_t c_def = 0, c_rouge = 0;
  for (std::size_t i = 0; i < sum.header.size(); ++i) {
    if (sum.header[i] == "defense") c_def = i;
    if (sum.header[i] == "rouge_mean") c_rouge = i;
  }
  BarChart chart;
  chart.title = "mean attack ROUGE-L per cell";
  for (const auto& row : sum.rows) {
    chart.labels.push_back(row[c_def]);
    chart.values.push_back(std::stod(row[c_rouge]));
  }
  std::string svg = (fs::path(dir) / "summary.svg").string();
  write_bar_chart_svg(svg, chart);
  std::printf("wrote %s\n", svg.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"split-inference privacy laboratory"};
  app.require_subcommand(1);

  CliOverrides o;
  std::string gen_out = "model.ckpt";
  std::string report_dir = "out";

  CLI::App* gen = app.add_subcommand("gen-model", "initialize and save a model");
  add_common(gen, o);
  gen->add_option("--out", gen_out, "checkpoint output path");

  CLI::App* train = app.add_subcommand("train", "train and save a model");
  add_common(train, o);
  train->add_option("--out", gen_out, "checkpoint output path");

  CLI::App* attack = app.add_subcommand("attack", "run the attack suite");
  add_common(attack, o);
  CLI::App* grid = app.add_subcommand("defend-grid", "run the defense grid");
  add_common(grid, o);
  CLI::App* q1 = app.add_subcommand("q1-ablation", "sweep the split point");
  add_common(q1, o);
  CLI::App* paf = app.add_subcommand("paf", "per-layer PAF study");
  add_common(paf, o);
  CLI::App* bypass = app.add_subcommand("bypass", "layer bypass study");
  add_common(bypass, o);
  CLI::App* timing = app.add_subcommand("timing", "defense timing study");
  add_common(timing, o);
  CLI::App* report = app.add_subcommand("report", "cross-check and plot");
  report->add_option("--dir", report_dir, "suite output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (report->parsed()) return run_report(report_dir);

    ExperimentConfig cfg;
    CLI::App* active = app.get_subcommands().front();
    try {
      cfg = resolve(active, o);
      if (gen->parsed() && !train->parsed()) cfg.train_steps = 0;
      cfg.validate();
    } catch (const Error& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return 1;
    }

    if (gen->parsed() || train->parsed()) {
      Workspace ws = prepare_workspace(cfg);
      save_model_artifacts(cfg, ws, gen_out);
      return 0;
    }
    if (attack->parsed()) {
      SuiteResult r = run_attack_suite(cfg);
      std::printf("wrote %s\n", r.results_csv.c_str());
      return 0;
    }
    if (grid->parsed()) {
      SuiteResult r = run_defense_grid(cfg);
      std::printf("wrote %s\n", r.results_csv.c_str());
      return 0;
    }
    if (q1->parsed()) {
      SuiteResult r = run_q1_ablation(cfg);
      std::printf("wrote %s\n", r.results_csv.c_str());
      return 0;
    }
    if (paf->parsed()) {
      PafStudyResult r = run_paf_study(cfg);
      std::printf("wrote %s\n", r.csv_path.c_str());
      return 0;
    }
    if (bypass->parsed()) {
      BypassStudyResult r = run_bypass_study(cfg);
      std::printf("wrote %s (pearson_r=%.4f)\n", r.csv_path.c_str(),
                  r.study.pearson_r);
      return 0;
    }
    if (timing->parsed()) {
      TimingResult r = run_timing(cfg);
      std::printf("wrote %s (fit slope %.6g)\n", r.csv_path.c_str(),
                  r.fit_slope);
      return 0;
    }
    std::fprintf(stderr, "no subcommand\n");
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 2;
  }
}
