#include "splitlab/harness.hpp"

#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <mutex>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "splitlab/report.hpp"

namespace splitlab {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
  model.validate();
  attack.validate();
  require(prompt_count >= 1, "config: prompt_count must be >= 1");
  require(max_prompt_len >= 1 && max_prompt_len <= model.max_seq_len,
          "config: max_prompt_len must be in [1, max_seq_len]");
  require(!corpus_path.empty(), "config: corpus path is required");
  require(fs::exists(corpus_path), "config: corpus not found: " + corpus_path);
  if (!checkpoint_path.empty())
    require(fs::exists(checkpoint_path),
            "config: checkpoint not found: " + checkpoint_path);
  for (const DefenseSpec& d : defenses) d.validate();
  for (std::size_t q1 : q1_sweep)
    require(q1 < model.num_blocks, "config: q1 sweep value out of [0, Q)");
  require(paf_draws >= 2, "config: paf_draws must be >= 2");
  require(workers >= 1, "config: workers must be >= 1");
  require(!output_dir.empty(), "config: output_dir is required");
}

void apply_env_seed(ExperimentConfig& cfg) {
  const char* env = std::getenv("SPLITLEAK_SEED");
  if (!env || !*env) return;
  char* end = nullptr;
  unsigned long long v = std::strtoull(env, &end, 10);
  require(end && *end == '\0', "SPLITLEAK_SEED: not an unsigned integer");
  cfg.seed = static_cast<std::uint64_t>(v);
  cfg.seed_from_env = true;
}

std::vector<std::string> load_corpus(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "corpus: cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = true;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
    if (blank) continue;
    json obj = json::parse(line, nullptr, false);
    require(!obj.is_discarded() && obj.is_object(),
            "corpus: malformed JSON on line " + std::to_string(line_no));
    require(obj.contains("text") && obj["text"].is_string(),
            "corpus: missing string field \"text\" on line " +
                std::to_string(line_no));
    out.push_back(obj["text"].get<std::string>());
  }
  return out;
}

Workspace prepare_workspace(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<std::string> lines = load_corpus(cfg.corpus_path);
  require(!lines.empty(), "corpus: no usable lines in " + cfg.corpus_path);
  Workspace ws;
  if (!cfg.checkpoint_path.empty()) {
    ws.model = load_checkpoint(cfg.checkpoint_path);
    std::string tok_path = cfg.checkpoint_path + ".tokenizer.json";
    require(fs::exists(tok_path),
            "checkpoint: tokenizer sidecar not found: " + tok_path);
    ws.tokenizer = Tokenizer::load(tok_path);
  } else {
    ws.tokenizer = Tokenizer::build(lines, cfg.model.vocab_size);
    ws.model = init_model(cfg.model);
    if (cfg.train_steps > 0) {
      std::vector<std::vector<int>> encoded;
      for (const std::string& s : lines) encoded.push_back(ws.tokenizer.encode(s));
      toy_train(ws.model, encoded, cfg.train_steps);
    }
  }
  std::size_t cap = std::min<std::size_t>(cfg.max_prompt_len,
                                          ws.model.config.max_seq_len);
  for (const std::string& s : lines) {
    if (ws.prompts.size() >= cfg.prompt_count) break;
    std::vector<int> ids = ws.tokenizer.encode(s);
    if (ids.empty()) continue;
    if (ids.size() > cap) ids.resize(cap);
    ws.prompts.push_back(std::move(ids));
  }
  require(!ws.prompts.empty(), "corpus: no encodable prompt");
  return ws;
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t count = std::min(workers, n);
  if (count <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error = nullptr;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct Cell {
  DefenseSpec spec;
  std::size_t q1 = 0;
};

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json defense_json(const DefenseSpec& d) {
  json j{{"kind", defense_kind_name(d.kind)},
         {"variance", d.variance},
         {"ratio", d.ratio},
         {"budget", d.budget},
         {"approx_steps", d.approx_steps},
         {"l0_rank_order", d.l0_rank_order == L0RankOrder::MaxImpactZeroed
                               ? "max-impact-zeroed"
                               : "min-impact-zeroed"},
         {"label", d.label()}};
  if (d.protected_positions) j["protected_positions"] = *d.protected_positions;
  return j;
}

json resolved_config_json(const ExperimentConfig& cfg) {
  json defs = json::array();
  for (const DefenseSpec& d : cfg.defenses) defs.push_back(defense_json(d));
  return json{
      {"model",
       {{"vocab_size", cfg.model.vocab_size},
        {"hidden_dim", cfg.model.hidden_dim},
        {"num_blocks", cfg.model.num_blocks},
        {"split_point", cfg.model.split_point},
        {"num_heads", cfg.model.num_heads},
        {"ffn_dim", cfg.model.ffn_dim},
        {"max_seq_len", cfg.model.max_seq_len},
        {"seed", cfg.model.seed}}},
      {"checkpoint_path", cfg.checkpoint_path},
      {"corpus_path", cfg.corpus_path},
      {"prompt_count", cfg.prompt_count},
      {"max_prompt_len", cfg.max_prompt_len},
      {"train_steps", cfg.train_steps},
      {"attack",
       {{"iterations", cfg.attack.iterations},
        {"learning_rate", cfg.attack.learning_rate},
        {"distance", distance_kind_name(cfg.attack.distance)},
        {"init", cfg.attack.init == AttackInit::SampleEmbeddingRows
                     ? "sample-embedding-rows"
                     : "gaussian"},
        {"restarts", cfg.attack.restarts},
        {"trace_every", cfg.attack.trace_every}}},
      {"defenses", defs},
      {"q1_sweep", cfg.q1_sweep},
      {"paf_draws", cfg.paf_draws},
      {"timing_trials", cfg.timing_trials},
      {"seed", cfg.seed},
      {"seed_from_env", cfg.seed_from_env},
      {"output_dir", cfg.output_dir},
      {"workers", cfg.workers},
      {"precision_recall_mode", "bag"}};
}

json platform_json() {
  json j;
#if defined(__clang__)
  j["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  j["compiler"] = std::string("gcc ") + __VERSION__;
#else
  j["compiler"] = "unknown";
#endif
  j["cplusplus"] = static_cast<long>(__cplusplus);
  j["pointer_bits"] = static_cast<int>(sizeof(void*) * 8);
#if defined(__linux__)
  j["os"] = "linux";
#elif defined(__APPLE__)
  j["os"] = "darwin";
#else
  j["os"] = "other";
#endif
  j["float_digits"] = 17;
  return j;
}

void write_manifest(const ExperimentConfig& cfg, const std::string& suite,
                    const std::vector<std::string>& files,
                    const std::vector<std::uint64_t>& sample_seeds,
                    double wall_seconds, const json& extra,
                    const std::string& path) {
  json j;
  j["artifact_version"] = kArtifactVersion;
  j["csv_schema_version"] = kCsvSchemaVersion;
  j["suite"] = suite;
  j["resolved_config"] = resolved_config_json(cfg);
  j["platform"] = platform_json();
  j["per_sample_seeds"] = sample_seeds;
  json fl = json::array();
  for (const std::string& f : files)
    fl.push_back(json{{"name", fs::path(f).filename().string()},
                      {"fnv1a", hash_hex(fnv1a_file(f))}});
  j["files"] = fl;
  j["wall_seconds"] = wall_seconds;
  if (!extra.is_null()) j["extra"] = extra;
  write_text_file(path, j.dump(2) + "\n");
}

std::vector<std::uint64_t> sample_seeds_for(const ExperimentConfig& cfg,
                                            std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t s = 0; s < count; ++s) seeds[s] = Rng::mix(cfg.seed, s);
  return seeds;
}

ResultRow run_one(const SplitModel& model, const std::vector<int>& truth,
                  std::size_t sample_id, const Cell& cell,
                  const AttackConfig& attack_cfg, Rng stream) {
  ResultRow row;
  row.sample_id = sample_id;
  row.defense = cell.spec.label();
  row.q1 = cell.q1;
  try {
    Tensor h0 = input_embedding(model, truth);
    Tensor h = client_forward(model, h0);
    auto t0 = std::chrono::steady_clock::now();
    DefenseContext ctx{&model, &h0, nullptr};
    Tensor defended = apply_defense(h, cell.spec, ctx, stream);
    row.defense_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    AttackResult res = actinv(model, defended, attack_cfg, stream, &truth);
    row.attack_seconds = res.wall_seconds;
    auto [p, r] = precision_recall(res.tokens, truth);
    row.precision = p;
    row.recall = r;
    row.rouge_l = rouge_l(res.tokens, truth);
    row.final_distance = res.final_distance;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

std::vector<ResultRow> run_cells(const ExperimentConfig& cfg,
                                 const Workspace& ws,
                                 const std::vector<Cell>& cells) {
  std::size_t samples = ws.prompts.size();
  std::vector<std::uint64_t> seeds = sample_seeds_for(cfg, samples);
  std::vector<SplitModel> models;
  models.reserve(cells.size());
  for (const Cell& c : cells) {
    SplitModel m = ws.model;
    m.config.split_point = c.q1;
    models.push_back(std::move(m));
  }
  std::vector<ResultRow> rows(cells.size() * samples);
  parallel_for(rows.size(), cfg.workers, [&](std::size_t idx) {
    std::size_t ci = idx / samples, si = idx % samples;
    Rng stream = Rng(seeds[si]).derive(ci + 1);
    rows[idx] = run_one(models[ci], ws.prompts[si], si, cells[ci], cfg.attack,
                        stream);
  });
  return rows;
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double v : xs) mean += v;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double acc = 0.0;
  for (double v : xs) acc += (v - mean) * (v - mean);
  sd = std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

CsvTable results_table(const std::vector<ResultRow>& rows) {
  CsvTable t;
  t.header = {"sample_id", "defense",        "q1",    "precision", "recall",
              "rouge_l",   "final_distance", "error"};
  for (const ResultRow& r : rows)
    t.rows.push_back({std::to_string(r.sample_id), r.defense,
                      std::to_string(r.q1), format_double(r.precision),
                      format_double(r.recall), format_double(r.rouge_l),
                      format_double(r.final_distance), r.error});
  return t;
}

CsvTable summary_table(const std::vector<SummaryRow>& rows) {
  CsvTable t;
  t.header = {"defense",        "q1",           "count",
              "precision_mean", "precision_std", "recall_mean",
              "recall_std",     "rouge_mean",    "rouge_std",
              "distance_mean",  "distance_std",  "agreement",
              "kl_divergence"};
  for (const SummaryRow& r : rows)
    t.rows.push_back({r.defense, std::to_string(r.q1), std::to_string(r.count),
                      format_double(r.precision_mean),
                      format_double(r.precision_std),
                      format_double(r.recall_mean), format_double(r.recall_std),
                      format_double(r.rouge_mean), format_double(r.rouge_std),
                      format_double(r.distance_mean),
                      format_double(r.distance_std), format_double(r.agreement),
                      format_double(r.kl_divergence)});
  return t;
}

CsvTable timing_table(const std::vector<ResultRow>& rows) {
  CsvTable t;
  t.header = {"sample_id", "defense", "q1", "attack_seconds",
              "defense_seconds"};
  for (const ResultRow& r : rows)
    t.rows.push_back({std::to_string(r.sample_id), r.defense,
                      std::to_string(r.q1), format_double(r.attack_seconds),
                      format_double(r.defense_seconds)});
  return t;
}

SuiteResult emit_suite(const ExperimentConfig& cfg, const std::string& suite,
                       std::vector<ResultRow> rows,
                       std::vector<SummaryRow> summary, double wall_seconds) {
  fs::create_directories(cfg.output_dir);
  SuiteResult out;
  out.rows = std::move(rows);
  out.summary = std::move(summary);
  out.results_csv = (fs::path(cfg.output_dir) / "results.csv").string();
  out.summary_csv = (fs::path(cfg.output_dir) / "summary.csv").string();
  out.timing_csv = (fs::path(cfg.output_dir) / "timing.csv").string();
  out.manifest_path = (fs::path(cfg.output_dir) / "manifest.json").string();
  write_csv(out.results_csv, results_table(out.rows));
  write_csv(out.summary_csv, summary_table(out.summary));
  write_csv(out.timing_csv, timing_table(out.rows));
  write_manifest(cfg, suite, {out.results_csv, out.summary_csv, out.timing_csv},
                 sample_seeds_for(cfg, cfg.prompt_count), wall_seconds,
                 json(nullptr), out.manifest_path);
  return out;
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  auto find = [&](const std::string& d, std::size_t q1) -> SummaryRow* {
    for (SummaryRow& s : out)
      if (s.defense == d && s.q1 == q1) return &s;
    return nullptr;
  };
  std::vector<std::pair<std::string, std::size_t>> order;
  std::map<std::pair<std::string, std::size_t>,
           std::array<std::vector<double>, 4>>
      acc;
  for (const ResultRow& r : rows) {
    auto key = std::make_pair(r.defense, r.q1);
    if (!acc.count(key)) order.push_back(key);
    auto& a = acc[key];
    if (!r.error.empty()) continue;
    a[0].push_back(r.precision);
    a[1].push_back(r.recall);
    a[2].push_back(r.rouge_l);
    a[3].push_back(r.final_distance);
  }
  for (const auto& key : order) {
    auto& a = acc[key];
    SummaryRow s;
    s.defense = key.first;
    s.q1 = key.second;
    s.count = a[0].size();
    mean_std(a[0], s.precision_mean, s.precision_std);
    mean_std(a[1], s.recall_mean, s.recall_std);
    mean_std(a[2], s.rouge_mean, s.rouge_std);
    mean_std(a[3], s.distance_mean, s.distance_std);
    if (SummaryRow* existing = find(s.defense, s.q1)) {
      *existing = s;
    } else {
      out.push_back(s);
    }
  }
  return out;
}

SuiteResult run_attack_suite(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  Workspace ws = prepare_workspace(cfg);
  std::vector<Cell> cells;
  if (cfg.defenses.empty()) {
    cells.push_back(Cell{DefenseSpec{}, ws.model.config.split_point});
  } else {
    for (const DefenseSpec& d : cfg.defenses)
      cells.push_back(Cell{d, ws.model.config.split_point});
  }
  std::vector<ResultRow> rows = run_cells(cfg, ws, cells);
  auto summary = summarize(rows);
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return emit_suite(cfg, "attack", std::move(rows), std::move(summary), wall);
}

std::vector<DefenseSpec> default_defense_grid() {
  std::vector<DefenseSpec> out;
  out.push_back(DefenseSpec{});  // clean reference cell
  for (double v : kGaussianLevels) {
    DefenseSpec d;
    d.kind = DefenseKind::Gaussian;
    d.variance = v;
    out.push_back(d);
  }
  for (DefenseKind k : {DefenseKind::ElementSparsify, DefenseKind::TokenSparsify,
                        DefenseKind::PripertL0}) {
    for (double r : kSparsityLevels) {
      DefenseSpec d;
      d.kind = k;
      d.ratio = r;
      out.push_back(d);
    }
  }
  for (double r : kSparsityLevels) {
    DefenseSpec d;
    d.kind = DefenseKind::PripertL2;
    d.budget = r;
    out.push_back(d);
  }
  return out;
}

SuiteResult run_defense_grid(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  Workspace ws = prepare_workspace(cfg);
  std::vector<DefenseSpec> specs =
      cfg.defenses.empty() ? default_defense_grid() : cfg.defenses;
  std::vector<Cell> cells;
  for (const DefenseSpec& d : specs)
    cells.push_back(Cell{d, ws.model.config.split_point});
  std::vector<ResultRow> rows = run_cells(cfg, ws, cells);
  auto summary = summarize(rows);
  // Utility per cell, on the same prompt set.
  std::vector<UtilityScore> utilities(cells.size());
  parallel_for(cells.size(), cfg.workers, [&](std::size_t ci) {
    Rng u = Rng(Rng::mix(cfg.seed, 0xBEEF)).derive(ci);
    utilities[ci] = utility_proxy(ws.model, ws.prompts, cells[ci].spec, u);
  });
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    for (SummaryRow& s : summary) {
      if (s.defense == cells[ci].spec.label() &&
          s.q1 == cells[ci].q1) {
        s.agreement = utilities[ci].agreement;
        s.kl_divergence = utilities[ci].kl_divergence;
      }
    }
  }
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return emit_suite(cfg, "defense-grid", std::move(rows), std::move(summary),
                    wall);
}

SuiteResult run_q1_ablation(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  Workspace ws = prepare_workspace(cfg);
  std::vector<std::size_t> sweep = cfg.q1_sweep;
  if (sweep.empty())
    for (std::size_t q = 1; q < ws.model.config.num_blocks; ++q)
      sweep.push_back(q);
  DefenseSpec defense;
  if (cfg.defenses.empty()) {
    defense.kind = DefenseKind::ElementSparsify;
    defense.ratio = 0.5;
  } else {
    defense = cfg.defenses.front();
  }
  std::vector<Cell> cells;
  for (std::size_t q1 : sweep) cells.push_back(Cell{defense, q1});
  std::vector<ResultRow> rows = run_cells(cfg, ws, cells);
  auto summary = summarize(rows);
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return emit_suite(cfg, "q1-ablation", std::move(rows), std::move(summary),
                    wall);
}

PafStudyResult run_paf_study(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  Workspace ws = prepare_workspace(cfg);
  std::vector<LayerRef> layers = client_layers(ws.model);
  require(!layers.empty(), "paf study: no client layers (split_point is 0)");
  std::vector<Tensor> inputs;
  for (const auto& p : ws.prompts) inputs.push_back(input_embedding(ws.model, p));
  std::vector<PafReport> reports(layers.size());
  parallel_for(layers.size(), cfg.workers, [&](std::size_t li) {
    Rng stream = Rng(cfg.seed).derive(li);
    reports[li] = paf_estimate(ws.model, layers[li], inputs, cfg.paf_draws,
                               stream);
  });

  fs::create_directories(cfg.output_dir);
  PafStudyResult out;
  out.reports = std::move(reports);
  out.csv_path = (fs::path(cfg.output_dir) / "paf.csv").string();
  out.svg_path = (fs::path(cfg.output_dir) / "paf.svg").string();
  out.manifest_path = (fs::path(cfg.output_dir) / "manifest.json").string();
  CsvTable t;
  t.header = {"layer",         "mean_paf",      "std_error",
              "max_paf",       "single_direction_max", "spectral_norm",
              "inputs",        "draws",         "degenerate"};
  BarChart chart;
  chart.title = "mean PAF per client layer";
  for (const PafReport& r : out.reports) {
    t.rows.push_back({r.layer.name(), format_double(r.mean_paf),
                      format_double(r.std_error), format_double(r.max_paf),
                      format_double(r.single_direction_max),
                      format_double(r.spectral_norm),
                      std::to_string(r.input_count),
                      std::to_string(r.draw_count),
                      r.degenerate ? "1" : "0"});
    chart.labels.push_back(r.layer.name());
    chart.values.push_back(r.mean_paf);
  }
  write_csv(out.csv_path, t);
  write_bar_chart_svg(out.svg_path, chart);
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  write_manifest(cfg, "paf", {out.csv_path, out.svg_path},
                 sample_seeds_for(cfg, ws.prompts.size()), wall, json(nullptr),
                 out.manifest_path);
  return out;
}

BypassStudyResult run_bypass_study(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  Workspace ws = prepare_workspace(cfg);
  DefenseSpec defense;
  if (cfg.defenses.empty()) {
    defense.kind = DefenseKind::ElementSparsify;
    defense.ratio = 0.5;
  } else {
    defense = cfg.defenses.front();
  }
  Rng rng(cfg.seed);
  BypassStudyResult out;
  out.study = bypass_study(ws.model, ws.prompts, cfg.attack, defense,
                           cfg.paf_draws, rng);

  fs::create_directories(cfg.output_dir);
  out.csv_path = (fs::path(cfg.output_dir) / "bypass.csv").string();
  out.svg_path = (fs::path(cfg.output_dir) / "bypass.svg").string();
  out.manifest_path = (fs::path(cfg.output_dir) / "manifest.json").string();
  CsvTable t;
  t.header = {"layer", "mean_paf", "max_paf", "rouge_l"};
  BarChart chart;
  chart.title = "attack ROUGE-L with each client layer bypassed";
  for (const BypassRow& r : out.study.rows) {
    t.rows.push_back({r.layer.name(), format_double(r.mean_paf),
                      format_double(r.max_paf), format_double(r.rouge)});
    chart.labels.push_back(r.layer.name());
    chart.values.push_back(r.rouge);
  }
  write_csv(out.csv_path, t);
  write_bar_chart_svg(out.svg_path, chart);
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  json extra{{"pearson_r", out.study.pearson_r},
             {"pearson_degenerate", out.study.degenerate},
             {"defense", defense.label()}};
  write_manifest(cfg, "bypass", {out.csv_path, out.svg_path},
                 sample_seeds_for(cfg, ws.prompts.size()), wall, extra,
                 out.manifest_path);
  return out;
}

TimingResult run_timing(const ExperimentConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  Workspace ws = prepare_workspace(cfg);
  const std::vector<int>& prompt = ws.prompts.front();
  Tensor h0 = input_embedding(ws.model, prompt);
  Tensor h = client_forward(ws.model, h0);
  double tokens = static_cast<double>(prompt.size());
  std::size_t trials = std::max<std::size_t>(1, cfg.timing_trials);

  std::vector<DefenseSpec> specs = cfg.defenses;
  if (specs.empty()) {
    specs.push_back(DefenseSpec{});
    DefenseSpec g;
    g.kind = DefenseKind::Gaussian;
    g.variance = 1e-2;
    specs.push_back(g);
    DefenseSpec e;
    e.kind = DefenseKind::ElementSparsify;
    e.ratio = 0.5;
    specs.push_back(e);
    DefenseSpec tk;
    tk.kind = DefenseKind::TokenSparsify;
    tk.ratio = 0.5;
    specs.push_back(tk);
    DefenseSpec p0;
    p0.kind = DefenseKind::PripertL0;
    p0.ratio = 0.5;
    specs.push_back(p0);
    DefenseSpec p2;
    p2.kind = DefenseKind::PripertL2;
    p2.budget = 0.5;
    specs.push_back(p2);
  }

  TimingResult out;
  Rng rng(cfg.seed);
  auto measure = [&](const DefenseSpec& spec) {
    std::vector<double> secs(trials);
    for (std::size_t tr = 0; tr < trials; ++tr) {
      Rng stream = rng.derive(tr);
      DefenseContext ctx{&ws.model, &h0, nullptr};
      auto a = std::chrono::steady_clock::now();
      Tensor defended = apply_defense(h, spec, ctx, stream);
      secs[tr] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - a)
              .count();
      (void)defended;
    }
    return secs;
  };

  for (const DefenseSpec& spec : specs) {
    std::vector<double> secs = measure(spec);
    double mean, sd;
    mean_std(secs, mean, sd);
    if (spec.kind == DefenseKind::None) out.baseline_seconds = mean;
    out.entries.push_back(TimingEntry{spec.label(), mean / tokens * 1000.0,
                                      sd / tokens * 1000.0, trials});
  }

  // Selective protection: time vs protected-row ratio for pripert-l2.
  std::size_t rows = h.rows();
  std::vector<double> ratios = {0.0};
  for (double r : kSelectiveRatios) ratios.push_back(r);
  for (double r : ratios) {
    DefenseSpec spec;
    spec.kind = DefenseKind::PripertL2;
    spec.budget = 0.5;
    std::size_t k = r == 0.0
                        ? 0
                        : std::max<std::size_t>(
                              1, static_cast<std::size_t>(std::llround(
                                     r * static_cast<double>(rows))));
    std::vector<std::size_t> prot;
    for (std::size_t i = 0; i < k; ++i) prot.push_back(i);
    spec.protected_positions = prot;
    std::vector<double> secs = measure(spec);
    double mean, sd;
    mean_std(secs, mean, sd);
    out.selective.push_back(SelectivePoint{r, mean});
  }

  // Least-squares line over the nonzero ratios.
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (const SelectivePoint& p : out.selective) {
      if (p.ratio == 0.0) continue;
      sx += p.ratio;
      sy += p.mean_seconds;
      sxx += p.ratio * p.ratio;
      sxy += p.ratio * p.mean_seconds;
      n += 1.0;
    }
    double denom = n * sxx - sx * sx;
    if (denom != 0.0) {
      out.fit_slope = (n * sxy - sx * sy) / denom;
      out.fit_intercept = (sy - out.fit_slope * sx) / n;
    }
    double rss = 0.0;
    for (const SelectivePoint& p : out.selective) {
      if (p.ratio == 0.0) continue;
      double e = p.mean_seconds - (out.fit_intercept + out.fit_slope * p.ratio);
      rss += e * e;
    }
    out.fit_rms_residual = n > 0 ? std::sqrt(rss / n) : 0.0;
  }

  fs::create_directories(cfg.output_dir);
  out.csv_path = (fs::path(cfg.output_dir) / "timing.csv").string();
  out.manifest_path = (fs::path(cfg.output_dir) / "manifest.json").string();
  CsvTable t;
  t.header = {"label", "mean_seconds_per_1k", "std_seconds_per_1k", "trials"};
  for (const TimingEntry& e : out.entries)
    t.rows.push_back({e.defense, format_double(e.mean_seconds_per_1k),
                      format_double(e.std_seconds_per_1k),
                      std::to_string(e.trials)});
  for (const SelectivePoint& p : out.selective)
    t.rows.push_back({"selective:" + format_double(p.ratio),
                      format_double(p.mean_seconds / tokens * 1000.0),
                      format_double(0.0), std::to_string(trials)});
  write_csv(out.csv_path, t);
  double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  json extra{{"fit_intercept", out.fit_intercept},
             {"fit_slope", out.fit_slope},
             {"fit_rms_residual", out.fit_rms_residual},
             {"baseline_seconds", out.baseline_seconds}};
  write_manifest(cfg, "timing", {out.csv_path},
                 sample_seeds_for(cfg, ws.prompts.size()), wall, extra,
                 out.manifest_path);
  return out;
}

namespace {

double parse_double_str(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    require(pos == s.size(), "trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Error("bad number \"" + s + "\" in " + where);
  }
}

std::size_t column(const CsvTable& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return i;
  throw Error("csv: missing column " + name);
}

bool close(double a, double b) {
  double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
  return std::fabs(a - b) <= 1e-9 * scale;
}

}  // namespace

bool crosscheck_summary(const std::string& results_csv,
                        const std::string& summary_csv) {
  CsvTable res = read_csv(results_csv);
  CsvTable sum = read_csv(summary_csv);
  std::vector<ResultRow> rows;
  std::size_t c_sample = column(res, "sample_id"), c_def = column(res, "defense"),
              c_q1 = column(res, "q1"), c_p = column(res, "precision"),
              c_r = column(res, "recall"), c_rl = column(res, "rouge_l"),
              c_d = column(res, "final_distance"), c_e = column(res, "error");
  for (const auto& r : res.rows) {
    ResultRow row;
    row.sample_id = std::stoull(r[c_sample]);
    row.defense = r[c_def];
    row.q1 = std::stoull(r[c_q1]);
    row.precision = parse_double_str(r[c_p], results_csv);
    row.recall = parse_double_str(r[c_r], results_csv);
    row.rouge_l = parse_double_str(r[c_rl], results_csv);
    row.final_distance = parse_double_str(r[c_d], results_csv);
    row.error = r[c_e];
    rows.push_back(row);
  }
  std::vector<SummaryRow> expect = summarize(rows);
  if (expect.size() != sum.rows.size()) return false;
  std::size_t s_def = column(sum, "defense"), s_q1 = column(sum, "q1"),
              s_cnt = column(sum, "count");
  const char* cols[] = {"precision_mean", "precision_std", "recall_mean",
                        "recall_std",     "rouge_mean",    "rouge_std",
                        "distance_mean",  "distance_std"};
  for (std::size_t i = 0; i < expect.size(); ++i) {
    const auto& row = sum.rows[i];
    const SummaryRow& e = expect[i];
    if (row[s_def] != e.defense) return false;
    if (std::stoull(row[s_q1]) != e.q1) return false;
    if (std::stoull(row[s_cnt]) != e.count) return false;
    double vals[] = {e.precision_mean, e.precision_std, e.recall_mean,
                     e.recall_std,     e.rouge_mean,    e.rouge_std,
                     e.distance_mean,  e.distance_std};
    for (std::size_t c = 0; c < 8; ++c)
      if (!close(parse_double_str(row[column(sum, cols[c])], summary_csv),
                 vals[c]))
        return false;
  }
  return true;
}

KvConfig parse_kv_text(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']',
              "config: bad section header on line " + std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      require(!section.empty(),
              "config: empty section name on line " + std::to_string(line_no));
      cfg[section];
      continue;
    }
    std::size_t eq = line.find('=');
    require(eq != std::string::npos,
            "config: expected key = value on line " + std::to_string(line_no));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    require(!key.empty(),
            "config: empty key on line " + std::to_string(line_no));
    cfg[section][key] = value;
  }
  return cfg;
}

KvConfig parse_kv_file(const std::string& path) {
  return parse_kv_text(read_text_file(path));
}

DefenseSpec defense_spec_from_string(const std::string& text) {
  DefenseSpec spec;
  std::size_t colon = text.find(':');
  std::string kind = colon == std::string::npos ? text : text.substr(0, colon);
  spec.kind = defense_kind_from_name(kind);
  if (colon != std::string::npos) {
    double param = parse_double_str(text.substr(colon + 1), "defense spec");
    switch (spec.kind) {
      case DefenseKind::None:
        throw Error("defense spec: 'none' takes no parameter");
      case DefenseKind::Gaussian:
        spec.variance = param;
        break;
      case DefenseKind::PripertL2:
        spec.budget = param;
        break;
      default:
        spec.ratio = param;
        break;
    }
  } else {
    require(spec.kind == DefenseKind::None,
            "defense spec: " + kind + " needs a :parameter");
  }
  spec.validate();
  return spec;
}

namespace {

std::uint64_t parse_u64_str(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos);
    require(pos == s.size(), "trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Error("bad integer \"" + s + "\" in " + where);
  }
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

}  // namespace

ExperimentConfig config_from_kv(const KvConfig& kv) {
  ExperimentConfig cfg;
  for (const auto& [section, entries] : kv) {
    for (const auto& [key, value] : entries) {
      std::string where = "[" + section + "] " + key;
      if (section == "model") {
        if (key == "vocab_size") cfg.model.vocab_size = parse_u64_str(value, where);
        else if (key == "hidden_dim") cfg.model.hidden_dim = parse_u64_str(value, where);
        else if (key == "num_blocks") cfg.model.num_blocks = parse_u64_str(value, where);
        else if (key == "split_point") cfg.model.split_point = parse_u64_str(value, where);
        else if (key == "num_heads") cfg.model.num_heads = parse_u64_str(value, where);
        else if (key == "ffn_dim") cfg.model.ffn_dim = parse_u64_str(value, where);
        else if (key == "max_seq_len") cfg.model.max_seq_len = parse_u64_str(value, where);
        else if (key == "seed") cfg.model.seed = parse_u64_str(value, where);
        else throw Error("config: unknown key " + where);
      } else if (section == "attack") {
        if (key == "iterations") cfg.attack.iterations = parse_u64_str(value, where);
        else if (key == "learning_rate") cfg.attack.learning_rate = parse_double_str(value, where);
        else if (key == "distance") cfg.attack.distance = distance_kind_from_name(value);
        else if (key == "init")
          cfg.attack.init = value == "gaussian" ? AttackInit::Gaussian
                                                : AttackInit::SampleEmbeddingRows;
        else if (key == "restarts") cfg.attack.restarts = parse_u64_str(value, where);
        else if (key == "trace_every") cfg.attack.trace_every = parse_u64_str(value, where);
        else throw Error("config: unknown key " + where);
      } else if (section == "experiment" || section.empty()) {
        if (key == "checkpoint") cfg.checkpoint_path = value;
        else if (key == "corpus") cfg.corpus_path = value;
        else if (key == "prompt_count") cfg.prompt_count = parse_u64_str(value, where);
        else if (key == "max_prompt_len") cfg.max_prompt_len = parse_u64_str(value, where);
        else if (key == "train_steps") cfg.train_steps = parse_u64_str(value, where);
        else if (key == "paf_draws") cfg.paf_draws = parse_u64_str(value, where);
        else if (key == "timing_trials") cfg.timing_trials = parse_u64_str(value, where);
        else if (key == "seed") cfg.seed = parse_u64_str(value, where);
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "workers") cfg.workers = parse_u64_str(value, where);
        else if (key == "q1_sweep") {
          cfg.q1_sweep.clear();
          for (const std::string& p : split_on(value, ','))
            cfg.q1_sweep.push_back(parse_u64_str(p, where));
        } else if (key == "defenses") {
          cfg.defenses.clear();
          for (const std::string& p : split_on(value, ';'))
            cfg.defenses.push_back(defense_spec_from_string(p));
        } else {
          throw Error("config: unknown key " + where);
        }
      } else {
        throw Error("config: unknown section [" + section + "]");
      }
    }
  }
  return cfg;
}

}  // namespace splitlab
