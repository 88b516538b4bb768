#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splitlab/model.hpp"
#include "splitlab/rng.hpp"

namespace splitlab {

enum class DefenseKind {
  None,
  Gaussian,
  ElementSparsify,
  TokenSparsify,
  PripertL0,
  PripertL2,
};

enum class L0RankOrder { MaxImpactZeroed, MinImpactZeroed };

std::string defense_kind_name(DefenseKind k);
DefenseKind defense_kind_from_name(const std::string& name);

struct DefenseSpec {
  DefenseKind kind = DefenseKind::None;
  double variance = 0.0;  // gaussian
  double ratio = 0.0;     // sparsify kinds and pripert-l0, fraction zeroed
  double budget = 0.0;    // pripert-l2 perturbation budget mu
  std::size_t approx_steps = 2;  // pripert path approximation
  L0RankOrder l0_rank_order = L0RankOrder::MaxImpactZeroed;
  // Selective mode (subset of token rows); absent means all rows.
  std::optional<std::vector<std::size_t>> protected_positions;

  void validate() const;
  double level_param() const;  // the one meaningful strength parameter
  std::string label() const;
};

// Paper-mapped defense level ladders (levels 1..5).
inline constexpr double kGaussianLevels[5] = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
inline constexpr double kSparsityLevels[5] = {0.1, 0.3, 0.5, 0.7, 0.9};

Tensor gaussian_noise(const Tensor& h, double variance, Rng& rng);
Tensor element_sparsify(const Tensor& h, double ratio);
Tensor token_sparsify(const Tensor& h, double ratio);

// Materialized trapezoidal average of the regularized inverse-Jacobian
// action J^T (J J^T + eps I)^-1 of the client map, restricted to the
// flattened coordinates of the protected rows.
struct InverseJacobianBundle {
  Tensor combined;                  // m' x m': delta (row) -> input deviation
  std::vector<std::size_t> coords;  // flat activation coords covered
  double epsilon = 1.0;
  std::size_t endpoints = 1;
};

InverseJacobianBundle inverse_jacobian_bundle(
    const SplitModel& model, const Tensor& z, std::size_t steps,
    double epsilon = 1.0,
    const std::vector<std::size_t>* protected_rows = nullptr);

Tensor pripert_l2(const Tensor& h, const InverseJacobianBundle& bundle,
                  double mu);
Tensor pripert_l0(const Tensor& h, const InverseJacobianBundle& bundle,
                  double ratio,
                  L0RankOrder order = L0RankOrder::MaxImpactZeroed);

struct DefenseContext {
  const SplitModel* model = nullptr;
  const Tensor* z = nullptr;                      // client input h_0
  const InverseJacobianBundle* bundle = nullptr;  // optional precomputed
};

Tensor apply_defense(const Tensor& h, const DefenseSpec& spec,
                     const DefenseContext& ctx, Rng& rng);

struct Theorem2Report {
  double mu = 0.0;
  double operator_norm = 0.0;       // C
  double deviation_norm = 0.0;      // ||Delta||
  double bound = 0.0;               // mu / C
  bool bound_holds = false;
  double d_min = 0.0;
  bool nn_case_applies = false;     // mu > C d_min / 2
  bool nn_recovery_failed = false;  // aimed perturbation defeats NN search
  int true_token = -1;
  int nearest_after = -1;
};

// Linear client map z -> z A (square invertible A), q = 2.
Theorem2Report theorem2_verify(const Tensor& a, const Tensor& embeddings,
                               const Tensor& z_row, double mu);

// General-purpose square inverse (Gauss-Jordan, partial pivoting).
Tensor invert_square(const Tensor& a);

}  // namespace splitlab
