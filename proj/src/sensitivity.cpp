#include "splitlab/sensitivity.hpp"

#include <cmath>

#include "splitlab/metrics.hpp"

namespace splitlab {

namespace {

constexpr double kReachableFrac = 1e-10;  // relative eigenvalue cutoff

double reachable_cutoff(const PafSpectrum& spec) {
  return spec.eigenvalues.empty() ? 0.0
                                  : kReachableFrac * spec.eigenvalues.front();
}

}  // namespace

PafSpectrum paf_spectrum(const Tensor& jacobian) {
  require(jacobian.shape.size() == 2, "paf_spectrum: need a matrix");
  std::size_t n = jacobian.rows();
  Tensor gram = t_matmul(jacobian, t_transpose(jacobian));  // J J^T, n x n
  EigResult eig = sym_eig(gram);
  PafSpectrum spec;
  spec.eigenvalues = std::move(eig.eigenvalues);
  spec.directions = std::move(eig.eigenvectors);
  double top = spec.eigenvalues.empty() ? 0.0 : spec.eigenvalues.front();
  spec.spectral_norm = top > 0.0 ? std::sqrt(top) : 0.0;
  (void)n;
  return spec;
}

double paf_draw(const Tensor& jacobian, const PafSpectrum& spec, Rng& rng) {
  std::size_t n = jacobian.rows(), m = jacobian.cols();
  // X = delta J^T, the output-space image of a standard normal delta.
  std::vector<double> delta(m);
  for (double& v : delta) v = rng.normal();
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += delta[j] * jacobian.at(i, j);
    x[i] = acc;
  }
  double xn = 0.0;
  for (double v : x) xn += v * v;
  xn = std::sqrt(xn);
  if (xn == 0.0 || spec.spectral_norm == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      dot += x[k] * spec.directions.at(i, k);
    double cos_theta = dot / xn;
    sum += std::abs(spec.spectral_norm * cos_theta /
                    std::sqrt(spec.eigenvalues[i] + 1.0));
  }
  return sum;
}

PafEstimate paf_from_jacobian(const Tensor& jacobian, std::size_t draws,
                              Rng& rng) {
  require(draws >= 2, "paf_from_jacobian: need at least two draws");
  PafSpectrum spec = paf_spectrum(jacobian);
  PafEstimate est;
  est.draws = draws;
  est.spectral_norm = spec.spectral_norm;
  if (spec.spectral_norm == 0.0) {
    est.degenerate = true;
    return est;
  }
  double cutoff = reachable_cutoff(spec);
  double sup_sq = 0.0, sigma_min = -1.0;
  for (double s : spec.eigenvalues) {
    if (s <= cutoff) continue;
    sup_sq += 1.0 / (s + 1.0);
    sigma_min = s;  // descending order: last kept is the smallest reachable
  }
  est.eig_max = spec.eigenvalues.front();
  est.eig_min = sigma_min >= 0.0 ? sigma_min : 0.0;
  est.max_paf = spec.spectral_norm * std::sqrt(sup_sq);
  est.single_direction_max =
      sigma_min >= 0.0 ? spec.spectral_norm / std::sqrt(sigma_min + 1.0) : 0.0;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t d = 0; d < draws; ++d) {
    double v = paf_draw(jacobian, spec, rng);
    sum += v;
    sum_sq += v * v;
  }
  double n = static_cast<double>(draws);
  est.mean = sum / n;
  double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
  est.std_error = std::sqrt(var / n);
  return est;
}

Tensor layer_jacobian(const SplitModel& model, const LayerRef& layer,
                      const Tensor& h0) {
  Tensor z = layer_input(model, layer, h0);
  return jacobian(
      [&](Tape& tape, Value zv) {
        ModelValues mv = lift_model(tape, model, false);
        return layer_forward(tape, model, mv, layer, zv);
      },
      z, kJacobianDimCap);
}

PafReport paf_estimate(const SplitModel& model, const LayerRef& layer,
                       const std::vector<Tensor>& inputs, std::size_t draws,
                       Rng& rng) {
  require(!inputs.empty(), "paf_estimate: no inputs");
  PafReport report;
  report.layer = layer;
  report.input_count = inputs.size();
  report.draw_count = draws;
  double sum = 0.0, sum_sq = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    Tensor j = layer_jacobian(model, layer, inputs[s]);
    Rng stream = rng.derive(s);
    PafEstimate est = paf_from_jacobian(j, draws, stream);
    if (est.degenerate) {
      report.degenerate = true;
      continue;
    }
    report.max_paf += est.max_paf;
    report.single_direction_max += est.single_direction_max;
    report.spectral_norm += est.spectral_norm;
    sum += est.mean * static_cast<double>(draws);
    sum_sq += (est.std_error * est.std_error * static_cast<double>(draws) +
               est.mean * est.mean) *
              static_cast<double>(draws);
    count += draws;
  }
  require(count > 0 || report.degenerate,
          "paf_estimate: no usable input");
  if (count == 0) return report;  // fully degenerate layer
  double inputs_used =
      static_cast<double>(count) / static_cast<double>(draws);
  report.max_paf /= inputs_used;
  report.single_direction_max /= inputs_used;
  report.spectral_norm /= inputs_used;
  double n = static_cast<double>(count);
  report.mean_paf = sum / n;
  double var = std::max(0.0, (sum_sq - sum * sum / n) / std::max(1.0, n - 1.0));
  report.std_error = std::sqrt(var / n);
  return report;
}

Thm1Report thm1_verify(const Tensor& jacobian, const Tensor& delta_row) {
  require(jacobian.shape.size() == 2, "thm1_verify: need a matrix");
  require(delta_row.numel() == jacobian.cols(),
          "thm1_verify: perturbation length mismatch");
  std::size_t n = jacobian.rows(), m = jacobian.cols();
  // X = delta J^T.
  Tensor x({1, n});
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      acc += delta_row.data[j] * jacobian.at(i, j);
    x.at(0, i) = acc;
  }
  double xn2 = 0.0;
  for (double v : x.data) xn2 += v * v;

  // lhs via direct regularized solve, rhs via the eigen decomposition: the
  // two sides are computed along independent paths.
  Tensor gram = t_matmul(jacobian, t_transpose(jacobian));
  Tensor reg = gram;
  for (std::size_t i = 0; i < n; ++i) reg.at(i, i) += 1.0;
  Tensor dev = solve_spd_right(reg, x);
  Thm1Report rep;
  for (double v : dev.data) rep.lhs += v * v;

  EigResult eig = sym_eig(gram);
  if (xn2 > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        dot += x.at(0, k) * eig.eigenvectors.at(i, k);
      // (‖X‖ cos theta_i)^2 = (X . mu_i)^2
      rep.rhs += dot * dot / (eig.eigenvalues[i] + 1.0);
    }
  }
  rep.holds = rep.lhs <= rep.rhs * (1.0 + 1e-9) + 1e-12;
  return rep;
}

BypassStudy bypass_study(const SplitModel& model,
                         const std::vector<std::vector<int>>& prompts,
                         const AttackConfig& attack_cfg,
                         const DefenseSpec& defense, std::size_t paf_draws,
                         Rng& rng,
                         const std::vector<LayerRef>* layers) {
  require(!prompts.empty(), "bypass_study: no prompts");
  std::vector<LayerRef> targets =
      layers ? *layers : client_layers(model);
  require(!targets.empty(), "bypass_study: no client layers");

  std::vector<Tensor> inputs;
  for (const auto& x : prompts) {
    require(!x.empty() && x.size() <= model.config.max_seq_len,
            "bypass_study: prompt length out of range");
    inputs.push_back(input_embedding(model, x));
  }

  BypassStudy study;
  for (std::size_t li = 0; li < targets.size(); ++li) {
    const LayerRef& layer = targets[li];
    Rng paf_rng = rng.derive(2 * li);
    PafReport paf = paf_estimate(model, layer, inputs, paf_draws, paf_rng);

    SplitModel patched = bypass(model, layer);
    Rng atk_rng = rng.derive(2 * li + 1);
    double rouge_sum = 0.0;
    for (std::size_t s = 0; s < prompts.size(); ++s) {
      Tensor h0 = input_embedding(patched, prompts[s]);
      Tensor h = client_forward(patched, h0);
      Rng stream = atk_rng.derive(s);
      DefenseContext ctx{&patched, &h0, nullptr};
      Tensor hd = apply_defense(h, defense, ctx, stream);
      AttackResult res = actinv(patched, hd, attack_cfg, stream, &prompts[s]);
      rouge_sum += rouge_l(res.tokens, prompts[s]);
    }
    BypassRow row;
    row.layer = layer;
    row.mean_paf = paf.mean_paf;
    row.max_paf = paf.max_paf;
    row.rouge = rouge_sum / static_cast<double>(prompts.size());
    study.rows.push_back(row);
  }

  std::vector<double> xs, ys;
  for (const BypassRow& r : study.rows) {
    xs.push_back(r.mean_paf);
    ys.push_back(r.rouge);
  }
  PearsonResult pr = pearson(xs, ys);
  study.pearson_r = pr.r;
  study.degenerate = pr.degenerate;
  return study;
}

}  // namespace splitlab
