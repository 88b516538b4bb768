#include "splitlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splitlab {

Tensor identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out.at(i, i) = 1.0;
  return out;
}

EigResult sym_eig(const Tensor& s, double sym_tol, std::size_t dim_cap) {
  require(s.shape.size() == 2 && s.rows() == s.cols(),
          "sym_eig: expects a square matrix");
  std::size_t n = s.rows();
  require(n <= dim_cap, "sym_eig: dimension cap exceeded");
  require_finite(s, "sym_eig");
  double scale = 0.0;
  for (double v : s.data) scale = std::max(scale, std::fabs(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      require(std::fabs(s.at(i, j) - s.at(j, i)) <=
                  sym_tol * std::max(1.0, scale),
              "sym_eig: asymmetric input");

  Tensor a = s;
  // Symmetrize exactly so rotations stay consistent.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (a.at(i, j) + a.at(j, i));
      a.at(i, j) = v;
      a.at(j, i) = v;
    }
  Tensor v = identity(n);  // columns accumulate eigenvectors

  auto off_norm = [&]() {
    double o = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) o += a.at(i, j) * a.at(i, j);
    return std::sqrt(2.0 * o);
  };
  double fro = frobenius_norm(a);
  double stop = std::max(1e-300, 1e-14 * std::max(1.0, fro));

  double* ad = a.data.data();
  double* vd = v.data.data();
  // Rotations below a fraction of the stop threshold cannot block
  // convergence and are skipped to keep sweeps cheap.
  double skip = stop / (static_cast<double>(n) * 8.0);
  for (int sweep = 0; sweep < 60 && off_norm() > stop; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      double* rp = ad + p * n;
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = rp[q];
        if (std::fabs(apq) <= skip) continue;
        double* rq = ad + q * n;
        double app = rp[p], aqq = rq[q];
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0.0 ? 1.0 : -1.0) /
                   (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = ad[k * n + p], akq = ad[k * n + q];
          ad[k * n + p] = c * akp - sn * akq;
          ad[k * n + q] = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = rp[k], aqk = rq[k];
          rp[k] = c * apk - sn * aqk;
          rq[k] = sn * apk + c * aqk;
        }
        double* wp = vd + p;
        double* wq = vd + q;
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = wp[k * n], vkq = wq[k * n];
          wp[k * n] = c * vkp - sn * vkq;
          wq[k * n] = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a.at(i, i) > a.at(j, j);
  });

  EigResult res;
  res.eigenvalues.resize(n);
  res.eigenvectors = Tensor({n, n});
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t c = order[r];
    res.eigenvalues[r] = a.at(c, c);
    // Deterministic sign: first component of largest magnitude positive.
    std::size_t imax = 0;
    for (std::size_t k = 1; k < n; ++k)
      if (std::fabs(v.at(k, c)) > std::fabs(v.at(imax, c))) imax = k;
    double sgn = v.at(imax, c) < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k)
      res.eigenvectors.at(r, k) = sgn * v.at(k, c);
  }
  return res;
}

SingularTriple top_singular(const Tensor& m) {
  require(m.shape.size() == 2, "top_singular: expects a matrix");
  require_finite(m, "top_singular");
  std::size_t r = m.rows(), c = m.cols();
  SingularTriple out;
  if (r <= c) {
    Tensor gram = t_matmul(m, t_transpose(m));  // r x r
    EigResult eig = sym_eig(gram);
    double lam = std::max(0.0, eig.eigenvalues[0]);
    out.sigma = std::sqrt(lam);
    out.left = Tensor({r});
    for (std::size_t i = 0; i < r; ++i) out.left[i] = eig.eigenvectors.at(0, i);
    out.right = Tensor({c});
    if (out.sigma > 0.0) {
      for (std::size_t j = 0; j < c; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < r; ++i) s += out.left[i] * m.at(i, j);
        out.right[j] = s / out.sigma;
      }
    } else if (c > 0) {
      out.right[0] = 1.0;
    }
  } else {
    Tensor gram = t_matmul(t_transpose(m), m);  // c x c
    EigResult eig = sym_eig(gram);
    double lam = std::max(0.0, eig.eigenvalues[0]);
    out.sigma = std::sqrt(lam);
    out.right = Tensor({c});
    for (std::size_t j = 0; j < c; ++j) out.right[j] = eig.eigenvectors.at(0, j);
    out.left = Tensor({r});
    if (out.sigma > 0.0) {
      for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += m.at(i, j) * out.right[j];
        out.left[i] = s / out.sigma;
      }
    } else if (r > 0) {
      out.left[0] = 1.0;
    }
  }
  // Deterministic sign: first nonzero component of the right vector positive.
  for (std::size_t j = 0; j < out.right.numel(); ++j) {
    if (out.right[j] != 0.0) {
      if (out.right[j] < 0.0) {
        for (double& x : out.right.data) x = -x;
        for (double& x : out.left.data) x = -x;
      }
      break;
    }
  }
  return out;
}

Tensor solve_spd_right(const Tensor& a, const Tensor& b) {
  require(a.shape.size() == 2 && a.rows() == a.cols(),
          "solve_spd_right: A must be square");
  std::size_t n = a.rows();
  require(b.shape.size() == 2 && b.cols() == n,
          "solve_spd_right: B column count must match A");
  // Cholesky A = L L^T.
  Tensor l({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        require(s > 0.0, "solve_spd_right: matrix not positive definite");
        l.at(i, i) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  // X A = B  <=>  A X^T = B^T (A symmetric); solve per row of B.
  std::size_t k = b.rows();
  Tensor x({k, n});
  std::vector<double> y(n);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = b.at(r, i);
      for (std::size_t j = 0; j < i; ++j) s -= l.at(i, j) * y[j];
      y[i] = s / l.at(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = y[i];
      for (std::size_t j = i + 1; j < n; ++j) s -= l.at(j, i) * x.at(r, j);
      x.at(r, i) = s / l.at(i, i);
    }
  }
  return x;
}

}  // namespace splitlab
