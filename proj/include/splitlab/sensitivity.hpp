#pragma once

#include <vector>

#include "splitlab/attack.hpp"
#include "splitlab/defense.hpp"
#include "splitlab/linalg.hpp"
#include "splitlab/model.hpp"
#include "splitlab/rng.hpp"

namespace splitlab {

// Spectral data of one layer Jacobian J (n x m, row-vector convention):
// eigenpairs of J J^T plus the spectral norm of J.
struct PafSpectrum {
  double spectral_norm = 0.0;
  std::vector<double> eigenvalues;  // of J J^T, descending
  Tensor directions;                // row i = unit eigenvector mu_i
};

PafSpectrum paf_spectrum(const Tensor& jacobian);

// One Monte Carlo term: sum_i |‖J‖ cos(theta_i) / sqrt(sigma_i + 1)| for a
// standard normal input perturbation delta.
double paf_draw(const Tensor& jacobian, const PafSpectrum& spec, Rng& rng);

struct PafEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double max_paf = 0.0;  // supremum over perturbation directions
  double single_direction_max = 0.0;  // best single eigen-direction term
  double spectral_norm = 0.0;
  double eig_min = 0.0;  // smallest reachable eigenvalue of J J^T
  double eig_max = 0.0;
  std::size_t draws = 0;
  bool degenerate = false;  // zero Jacobian
};

PafEstimate paf_from_jacobian(const Tensor& jacobian, std::size_t draws,
                              Rng& rng);

// Monte Carlo budget that brings the standard error of the mean under 0.01
// for the closed-form calibration spectra.
inline constexpr std::size_t kCalibrationDraws = 40000;

struct PafReport {
  LayerRef layer;
  double mean_paf = 0.0;
  double std_error = 0.0;
  double max_paf = 0.0;
  double single_direction_max = 0.0;
  double spectral_norm = 0.0;
  std::size_t input_count = 0;
  std::size_t draw_count = 0;  // per input
  bool degenerate = false;
};

// Layer Jacobians are taken at the operating points the layer sees when the
// model runs on each h0; statistics average over inputs and draws.
PafReport paf_estimate(const SplitModel& model, const LayerRef& layer,
                       const std::vector<Tensor>& inputs, std::size_t draws,
                       Rng& rng);

Tensor layer_jacobian(const SplitModel& model, const LayerRef& layer,
                      const Tensor& h0);

struct Thm1Report {
  double lhs = 0.0;  // ‖delta J^T (J J^T + I)^{-1}‖^2
  double rhs = 0.0;  // sum_i (‖delta J^T‖ cos theta_i)^2 / (sigma_i + 1)
  bool holds = false;
};

// Regularized-inversion deviation bound for one perturbation row vector.
Thm1Report thm1_verify(const Tensor& jacobian, const Tensor& delta_row);

struct BypassRow {
  LayerRef layer;
  double mean_paf = 0.0;
  double max_paf = 0.0;
  double rouge = 0.0;  // mean reconstruction ROUGE-L with the layer bypassed
};

struct BypassStudy {
  std::vector<BypassRow> rows;
  double pearson_r = 0.0;
  bool degenerate = false;
};

// Bypass each client-side layer in turn, re-run the inversion attack under a
// fixed defense, and correlate the layer's PAF (measured on the intact
// model) with the recovered ROUGE-L.
BypassStudy bypass_study(const SplitModel& model,
                         const std::vector<std::vector<int>>& prompts,
                         const AttackConfig& attack_cfg,
                         const DefenseSpec& defense, std::size_t paf_draws,
                         Rng& rng,
                         const std::vector<LayerRef>* layers = nullptr);

}  // namespace splitlab
