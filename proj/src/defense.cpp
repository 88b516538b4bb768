#include "splitlab/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "splitlab/linalg.hpp"

namespace splitlab {

std::string defense_kind_name(DefenseKind k) {
  switch (k) {
    case DefenseKind::None: return "none";
    case DefenseKind::Gaussian: return "gaussian";
    case DefenseKind::ElementSparsify: return "element-sparsify";
    case DefenseKind::TokenSparsify: return "token-sparsify";
    case DefenseKind::PripertL0: return "pripert-l0";
    case DefenseKind::PripertL2: return "pripert-l2";
  }
  throw Error("defense_kind_name: unknown kind");
}

DefenseKind defense_kind_from_name(const std::string& name) {
  for (DefenseKind k :
       {DefenseKind::None, DefenseKind::Gaussian, DefenseKind::ElementSparsify,
        DefenseKind::TokenSparsify, DefenseKind::PripertL0,
        DefenseKind::PripertL2})
    if (defense_kind_name(k) == name) return k;
  throw Error("unknown defense kind: " + name);
}

void DefenseSpec::validate() const {
  switch (kind) {
    case DefenseKind::None:
      break;
    case DefenseKind::Gaussian:
      require(variance >= 0.0, "defense: variance must be non-negative");
      break;
    case DefenseKind::ElementSparsify:
    case DefenseKind::TokenSparsify:
    case DefenseKind::PripertL0:
      require(ratio >= 0.0 && ratio <= 1.0, "defense: ratio must be in [0,1]");
      break;
    case DefenseKind::PripertL2:
      require(budget > 0.0, "defense: budget mu must be positive");
      break;
  }
  if (kind == DefenseKind::PripertL0 || kind == DefenseKind::PripertL2)
    require(approx_steps >= 1, "defense: approx steps must be >= 1");
}

double DefenseSpec::level_param() const {
  switch (kind) {
    case DefenseKind::None: return 0.0;
    case DefenseKind::Gaussian: return variance;
    case DefenseKind::PripertL2: return budget;
    default: return ratio;
  }
}

std::string DefenseSpec::label() const {
  std::ostringstream os;
  os << defense_kind_name(kind);
  if (kind != DefenseKind::None) os << ":" << level_param();
  return os.str();
}

Tensor gaussian_noise(const Tensor& h, double variance, Rng& rng) {
  require(variance >= 0.0, "gaussian_noise: variance must be non-negative");
  Tensor out = h;
  double sd = std::sqrt(variance);
  for (double& v : out.data) v += sd * rng.normal();
  require_finite(out, "gaussian_noise");
  return out;
}

Tensor element_sparsify(const Tensor& h, double ratio) {
  require(ratio >= 0.0 && ratio <= 1.0, "element_sparsify: ratio in [0,1]");
  std::size_t k = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(h.numel())));
  Tensor out = h;
  if (k == 0) return out;
  std::vector<std::size_t> idx(h.numel());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(h.data[a]) < std::fabs(h.data[b]);
  });
  for (std::size_t i = 0; i < k; ++i) out.data[idx[i]] = 0.0;
  return out;
}

Tensor token_sparsify(const Tensor& h, double ratio) {
  require(ratio >= 0.0 && ratio <= 1.0, "token_sparsify: ratio in [0,1]");
  std::size_t rows = h.rows(), cols = h.cols();
  std::size_t k = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(rows)));
  Tensor out = h;
  if (k == 0) return out;
  std::vector<double> norms(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      norms[i] += h.at(i, j) * h.at(i, j);
  std::vector<std::size_t> idx(rows);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return norms[a] < norms[b];
  });
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < cols; ++j) out.at(idx[i], j) = 0.0;
  return out;
}

namespace {

std::vector<std::size_t> flat_coords(const Tensor& z,
                                     const std::vector<std::size_t>* rows) {
  std::size_t d = z.cols();
  std::vector<std::size_t> coords;
  if (!rows) {
    coords.resize(z.numel());
    std::iota(coords.begin(), coords.end(), 0);
    return coords;
  }
  std::vector<std::size_t> sorted = *rows;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t r : sorted) {
    require(r < z.rows(), "inverse_jacobian_bundle: protected row out of range");
    for (std::size_t j = 0; j < d; ++j) coords.push_back(r * d + j);
  }
  return coords;
}

// Restricted Jacobian J'[i][k] = d out[coords[k]] / d z[coords[i]], with the
// unprotected coordinates of z held fixed.
Tensor restricted_jacobian(const SplitModel& model, const Tensor& z,
                           const std::vector<std::size_t>& coords) {
  std::size_t n = coords.size();
  require(n > 0 && n <= kJacobianDimCap,
          "inverse_jacobian_bundle: dimension cap exceeded");
  Tape tape;
  ModelValues mv = lift_model(tape, model, false);
  Value zv = tape.leaf(z, true);
  Value out = client_forward(tape, model, mv, zv);
  const Tensor& ov = tape.val(out);
  Tensor cot = ov;
  for (double& v : cot.data) v = 0.0;
  Tensor jac({n, n});
  for (std::size_t k = 0; k < n; ++k) {
    cot.data[coords[k]] = 1.0;
    tape.backward_cotangent(out, cot);
    cot.data[coords[k]] = 0.0;
    const Tensor& g = tape.grad(zv);
    for (std::size_t i = 0; i < n; ++i) jac.at(i, k) = g.data[coords[i]];
  }
  require_finite(jac, "inverse_jacobian_bundle: non-finite Jacobian");
  return jac;
}

// Regularized inverse action G = J^T (J J^T + eps I)^-1 (row convention).
Tensor inverse_action(const Tensor& jac, double epsilon) {
  std::size_t n = jac.rows();
  Tensor s = t_matmul(jac, t_transpose(jac));
  for (std::size_t i = 0; i < n; ++i) s.at(i, i) += epsilon;
  return solve_spd_right(s, t_transpose(jac));
}

// Unit direction delta maximizing ||delta G||_2, deterministic sign.
Tensor top_left_direction(const Tensor& g) {
  Tensor gram = t_matmul(g, t_transpose(g));
  EigResult eig = sym_eig(gram, 1e-8);
  std::size_t n = g.rows();
  Tensor u({n});
  for (std::size_t i = 0; i < n; ++i) u[i] = eig.eigenvectors.at(0, i);
  for (std::size_t i = 0; i < n; ++i) {
    if (u[i] != 0.0) {
      if (u[i] < 0.0)
        for (double& v : u.data) v = -v;
      break;
    }
  }
  return u;
}

}  // namespace

InverseJacobianBundle inverse_jacobian_bundle(
    const SplitModel& model, const Tensor& z, std::size_t steps, double epsilon,
    const std::vector<std::size_t>* protected_rows) {
  require(steps >= 1, "inverse_jacobian_bundle: steps must be >= 1");
  require(epsilon > 0.0, "inverse_jacobian_bundle: epsilon must be positive");
  InverseJacobianBundle bundle;
  bundle.epsilon = epsilon;
  bundle.coords = flat_coords(z, protected_rows);

  Tensor g0 = inverse_action(restricted_jacobian(model, z, bundle.coords),
                             epsilon);
  if (steps == 1) {
    bundle.combined = std::move(g0);
    bundle.endpoints = 1;
    return bundle;
  }

  // Estimate the far endpoint from the one-point solution: a unit-budget
  // perturbation along the most amplified direction, mapped to input space.
  Tensor delta_hat = top_left_direction(g0);
  Tensor dev = t_matmul(t_reshape(delta_hat, {1, delta_hat.numel()}), g0);
  Tensor z_hat = z;
  for (std::size_t k = 0; k < bundle.coords.size(); ++k)
    z_hat.data[bundle.coords[k]] += dev.data[k];

  std::size_t n = bundle.coords.size();
  Tensor acc({n, n});
  double denom = static_cast<double>(steps - 1);
  for (std::size_t s = 0; s < steps; ++s) {
    double t = static_cast<double>(s) / denom;
    double w = (s == 0 || s + 1 == steps) ? 0.5 / denom : 1.0 / denom;
    Tensor point = z;
    for (std::size_t k = 0; k < bundle.coords.size(); ++k)
      point.data[bundle.coords[k]] =
          (1.0 - t) * z.data[bundle.coords[k]] +
          t * z_hat.data[bundle.coords[k]];
    Tensor gs = s == 0 ? g0
                       : inverse_action(
                             restricted_jacobian(model, point, bundle.coords),
                             epsilon);
    for (std::size_t i = 0; i < acc.numel(); ++i)
      acc.data[i] += w * gs.data[i];
  }
  bundle.combined = std::move(acc);
  bundle.endpoints = steps;
  return bundle;
}

Tensor pripert_l2(const Tensor& h, const InverseJacobianBundle& bundle,
                  double mu) {
  require(mu > 0.0, "pripert_l2: mu must be positive");
  require(bundle.combined.rows() == bundle.coords.size(),
          "pripert_l2: bundle shape mismatch");
  Tensor dir = top_left_direction(bundle.combined);
  Tensor out = h;
  for (std::size_t k = 0; k < bundle.coords.size(); ++k)
    out.data[bundle.coords[k]] += mu * dir[k];
  return out;
}

Tensor pripert_l0(const Tensor& h, const InverseJacobianBundle& bundle,
                  double ratio, L0RankOrder order) {
  require(ratio >= 0.0 && ratio <= 1.0, "pripert_l0: ratio in [0,1]");
  std::size_t m = bundle.coords.size();
  std::size_t k = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(m)));
  Tensor out = h;
  if (k == 0) return out;
  const Tensor& g = bundle.combined;
  std::vector<double> scores(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double rn = 0.0;
    for (std::size_t j = 0; j < g.cols(); ++j) rn += g.at(i, j) * g.at(i, j);
    scores[i] = std::fabs(h.data[bundle.coords[i]]) * std::sqrt(rn);
  }
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  if (order == L0RankOrder::MaxImpactZeroed) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] > scores[b];
    });
  } else {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] < scores[b];
    });
  }
  for (std::size_t i = 0; i < k; ++i) out.data[bundle.coords[idx[i]]] = 0.0;
  return out;
}

Tensor apply_defense(const Tensor& h, const DefenseSpec& spec,
                     const DefenseContext& ctx, Rng& rng) {
  spec.validate();
  switch (spec.kind) {
    case DefenseKind::None:
      return h;
    case DefenseKind::Gaussian:
      return gaussian_noise(h, spec.variance, rng);
    case DefenseKind::ElementSparsify:
      return element_sparsify(h, spec.ratio);
    case DefenseKind::TokenSparsify:
      return token_sparsify(h, spec.ratio);
    case DefenseKind::PripertL0:
    case DefenseKind::PripertL2:
      break;
  }
  if (spec.protected_positions && spec.protected_positions->empty()) return h;
  InverseJacobianBundle local;
  const InverseJacobianBundle* bundle = ctx.bundle;
  if (!bundle) {
    require(ctx.model != nullptr && ctx.z != nullptr,
            "apply_defense: pripert kinds need model context");
    local = inverse_jacobian_bundle(
        *ctx.model, *ctx.z, spec.approx_steps, 1.0,
        spec.protected_positions ? &*spec.protected_positions : nullptr);
    bundle = &local;
  }
  return spec.kind == DefenseKind::PripertL2
             ? pripert_l2(h, *bundle, spec.budget)
             : pripert_l0(h, *bundle, spec.ratio, spec.l0_rank_order);
}

Tensor invert_square(const Tensor& a) {
  require(a.shape.size() == 2 && a.rows() == a.cols(),
          "invert_square: matrix must be square");
  std::size_t n = a.rows();
  Tensor m = a;
  Tensor inv = identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(m.at(r, col)) > std::fabs(m.at(piv, col))) piv = r;
    require(std::fabs(m.at(piv, col)) > 1e-300, "invert_square: singular matrix");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(m.at(piv, j), m.at(col, j));
        std::swap(inv.at(piv, j), inv.at(col, j));
      }
    }
    double p = m.at(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      m.at(col, j) /= p;
      inv.at(col, j) /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = m.at(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        m.at(r, j) -= f * m.at(col, j);
        inv.at(r, j) -= f * inv.at(col, j);
      }
    }
  }
  return inv;
}

Theorem2Report theorem2_verify(const Tensor& a, const Tensor& embeddings,
                               const Tensor& z_row, double mu) {
  require(mu > 0.0, "theorem2_verify: mu must be positive");
  require(z_row.shape.size() == 2 && z_row.rows() == 1,
          "theorem2_verify: z must be a single row");
  std::size_t n = z_row.cols();
  require(a.rows() == n && a.cols() == n, "theorem2_verify: A shape mismatch");

  Theorem2Report rep;
  rep.mu = mu;
  Tensor a_inv = invert_square(a);
  rep.operator_norm = top_singular(a).sigma;
  rep.bound = mu / rep.operator_norm;

  // Budget-saturating perturbation along the most amplified direction of
  // the inverse map.
  Tensor dir = top_left_direction(a_inv);
  Tensor delta = t_scale(t_reshape(dir, {1, n}), mu);
  Tensor deviation = t_matmul(delta, a_inv);
  rep.deviation_norm = l2_norm(deviation);
  rep.bound_holds = rep.deviation_norm >= rep.bound * (1.0 - 1e-9);

  // Nearest-neighbor part: find the closest other embedding to z.
  std::size_t v = embeddings.rows();
  require(v >= 2 && embeddings.cols() == n,
          "theorem2_verify: embedding table shape mismatch");
  int true_tok = -1;
  {
    double best = 0.0;
    for (std::size_t t = 0; t < v; ++t) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double d = z_row.at(0, j) - embeddings.at(t, j);
        d2 += d * d;
      }
      if (true_tok < 0 || d2 < best) {
        best = d2;
        true_tok = static_cast<int>(t);
      }
    }
  }
  rep.true_token = true_tok;
  int e_min = -1;
  double dmin = 0.0;
  for (std::size_t t = 0; t < v; ++t) {
    if (static_cast<int>(t) == true_tok) continue;
    double d2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = z_row.at(0, j) - embeddings.at(t, j);
      d2 += d * d;
    }
    if (e_min < 0 || d2 < dmin) {
      dmin = d2;
      e_min = static_cast<int>(t);
    }
  }
  rep.d_min = std::sqrt(dmin);
  rep.nn_case_applies = mu > rep.operator_norm * rep.d_min / 2.0;
  if (rep.nn_case_applies && e_min >= 0) {
    // Aim the input deviation straight at the nearest other embedding,
    // scaled so the activation-space perturbation saturates the budget.
    Tensor toward({1, n});
    for (std::size_t j = 0; j < n; ++j)
      toward.at(0, j) =
          embeddings.at(static_cast<std::size_t>(e_min), j) - z_row.at(0, j);
    double tn = l2_norm(toward);
    require(tn > 0.0, "theorem2_verify: degenerate embedding pair");
    for (double& x : toward.data) x /= tn;
    Tensor delta_aim = t_matmul(toward, a);
    double dn = l2_norm(delta_aim);
    Tensor dev_aim = t_scale(toward, mu / dn);  // ||delta_aim * A^-1|| path
    Tensor z_hat = t_add(z_row, dev_aim);
    int nearest = -1;
    double best = 0.0;
    for (std::size_t t = 0; t < v; ++t) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double d = z_hat.at(0, j) - embeddings.at(t, j);
        d2 += d * d;
      }
      if (nearest < 0 || d2 < best) {
        best = d2;
        nearest = static_cast<int>(t);
      }
    }
    rep.nearest_after = nearest;
    rep.nn_recovery_failed = nearest != true_tok;
  }
  return rep;
}

}  // namespace splitlab
