#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "splitlab/attack.hpp"
#include "splitlab/defense.hpp"
#include "splitlab/metrics.hpp"
#include "splitlab/model.hpp"
#include "splitlab/sensitivity.hpp"
#include "splitlab/tokenizer.hpp"

namespace splitlab {

inline constexpr int kCsvSchemaVersion = 1;
inline constexpr int kArtifactVersion = 1;

struct ExperimentConfig {
  ModelConfig model;
  std::string checkpoint_path;  // when set, overrides model + training
  std::string corpus_path;
  std::size_t prompt_count = 50;
  std::size_t max_prompt_len = 12;
  std::size_t train_steps = 0;  // toy training before the experiment
  AttackConfig attack;
  std::vector<DefenseSpec> defenses;
  std::vector<std::size_t> q1_sweep;
  std::size_t paf_draws = 200;
  std::size_t timing_trials = 30;
  std::uint64_t seed = 1;
  bool seed_from_env = false;
  std::string output_dir = "out";
  std::size_t workers = 1;

  void validate() const;
};

// Applies SPLITLEAK_SEED when present; records the override in the config.
void apply_env_seed(ExperimentConfig& cfg);

// JSON Lines with a string field "text"; blank lines skipped; malformed
// lines rejected with their line number.
std::vector<std::string> load_corpus(const std::string& path);

struct Workspace {
  SplitModel model;
  Tokenizer tokenizer;
  std::vector<std::vector<int>> prompts;  // encoded, truncated, non-empty
};

Workspace prepare_workspace(const ExperimentConfig& cfg);

struct ResultRow {
  std::size_t sample_id = 0;
  std::string defense;  // "kind:param" cell label
  std::size_t q1 = 0;
  double precision = 0.0;
  double recall = 0.0;
  double rouge_l = 0.0;
  double final_distance = 0.0;
  std::string error;  // empty on success
  // Wall-clock fields land in the timing sidecar, never in results.csv.
  double attack_seconds = 0.0;
  double defense_seconds = 0.0;
};

struct SummaryRow {
  std::string defense;
  std::size_t q1 = 0;
  std::size_t count = 0;  // successful samples
  double precision_mean = 0.0, precision_std = 0.0;
  double recall_mean = 0.0, recall_std = 0.0;
  double rouge_mean = 0.0, rouge_std = 0.0;
  double distance_mean = 0.0, distance_std = 0.0;
  double agreement = -1.0;      // defense grid only, else -1
  double kl_divergence = -1.0;  // defense grid only, else -1
};

struct SuiteResult {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
  std::string results_csv;
  std::string summary_csv;
  std::string timing_csv;
  std::string manifest_path;
};

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

SuiteResult run_attack_suite(const ExperimentConfig& cfg);
SuiteResult run_defense_grid(const ExperimentConfig& cfg);
SuiteResult run_q1_ablation(const ExperimentConfig& cfg);

// The full five-kind x five-level defense grid, plus the clean cell.
std::vector<DefenseSpec> default_defense_grid();

struct PafStudyResult {
  std::vector<PafReport> reports;
  std::string csv_path;
  std::string svg_path;
  std::string manifest_path;
};
PafStudyResult run_paf_study(const ExperimentConfig& cfg);

struct BypassStudyResult {
  BypassStudy study;
  std::string csv_path;
  std::string svg_path;
  std::string manifest_path;
};
BypassStudyResult run_bypass_study(const ExperimentConfig& cfg);

struct TimingEntry {
  std::string defense;
  double mean_seconds_per_1k = 0.0;
  double std_seconds_per_1k = 0.0;
  std::size_t trials = 0;
};
struct SelectivePoint {
  double ratio = 0.0;
  double mean_seconds = 0.0;
};
struct TimingResult {
  std::vector<TimingEntry> entries;
  double baseline_seconds = 0.0;  // defense none, raw seconds per call
  std::vector<SelectivePoint> selective;
  double fit_intercept = 0.0;
  double fit_slope = 0.0;
  double fit_rms_residual = 0.0;
  std::string csv_path;
  std::string manifest_path;
};
TimingResult run_timing(const ExperimentConfig& cfg);

inline constexpr double kSelectiveRatios[3] = {0.05, 0.25, 1.0};

// Dispatches items 0..n-1 to at most `workers` threads; caller-provided
// slots make the merge order-independent.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

// Recomputes every summary row from the raw rows and compares.
bool crosscheck_summary(const std::string& results_csv,
                        const std::string& summary_csv);

// Plain-text key-value config with [section] headers; '#' comments.
using KvConfig = std::map<std::string, std::map<std::string, std::string>>;
KvConfig parse_kv_text(const std::string& text);
KvConfig parse_kv_file(const std::string& path);
ExperimentConfig config_from_kv(const KvConfig& kv);
DefenseSpec defense_spec_from_string(const std::string& text);

}  // namespace splitlab
