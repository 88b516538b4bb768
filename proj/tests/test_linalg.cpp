#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "splitlab/defense.hpp"
#include "splitlab/linalg.hpp"
#include "splitlab/rng.hpp"

using namespace splitlab;

namespace {

Tensor random_spd(std::size_t n, Rng& rng) {
  Tensor m({n, n});
  for (double& v : m.data) v = rng.normal();
  Tensor s = t_matmul(m, t_transpose(m));
  for (std::size_t i = 0; i < n; ++i) s.at(i, i) += 0.5;
  return s;
}

// Power iteration on M M^T, an oracle independent of the Jacobi path.
double power_sigma(const Tensor& m, int iters = 3000) {
  Tensor gram = t_matmul(m, t_transpose(m));
  std::size_t n = gram.rows();
  std::vector<double> v(n, 1.0);
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) w[i] += gram.at(i, j) * v[j];
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    lam = norm;
  }
  return std::sqrt(lam);
}

}  // namespace

TEST_CASE("sym_eig recovers a diagonal spectrum") {
  Tensor d = Tensor::matrix(3, 3, {5, 0, 0, 0, -1, 0, 0, 0, 2});
  EigResult e = sym_eig(d);
  CHECK(e.eigenvalues[0] == doctest::Approx(5));
  CHECK(e.eigenvalues[1] == doctest::Approx(2));
  CHECK(e.eigenvalues[2] == doctest::Approx(-1));
  CHECK(std::fabs(e.eigenvectors.at(0, 0)) == doctest::Approx(1.0));
  CHECK(std::fabs(e.eigenvectors.at(2, 1)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig reconstructs the input and is orthonormal") {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    std::size_t n = 6;
    Tensor s = random_spd(n, rng);
    EigResult e = sym_eig(s);
    // Orthonormal rows.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k)
          dot += e.eigenvectors.at(i, k) * e.eigenvectors.at(j, k);
        CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
      }
    // Reconstruction sum_i lambda_i mu_i^T mu_i.
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          acc += e.eigenvalues[i] * e.eigenvectors.at(i, r) *
                 e.eigenvectors.at(i, c);
        CHECK(acc == doctest::Approx(s.at(r, c)).epsilon(1e-8));
      }
    // Descending order.
    for (std::size_t i = 0; i + 1 < n; ++i)
      CHECK(e.eigenvalues[i] >= e.eigenvalues[i + 1]);
  }
}

TEST_CASE("sym_eig rejects asymmetric input and honors the cap") {
  Tensor bad = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK_THROWS_AS(sym_eig(bad), Error);
  Rng rng(1);
  Tensor big = random_spd(5, rng);
  CHECK_THROWS_AS(sym_eig(big, 1e-10, 4), Error);
}

TEST_CASE("sym_eig is deterministic across calls") {
  Rng rng(12);
  Tensor s = random_spd(8, rng);
  EigResult a = sym_eig(s);
  EigResult b = sym_eig(s);
  CHECK(a.eigenvalues == b.eigenvalues);
  CHECK(a.eigenvectors.data == b.eigenvectors.data);
}

TEST_CASE("top_singular matches a power-iteration oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    std::size_t r = 3 + static_cast<std::size_t>(rng.uniform_int(4));
    std::size_t c = 3 + static_cast<std::size_t>(rng.uniform_int(4));
    Tensor m({r, c});
    for (double& v : m.data) v = rng.normal();
    SingularTriple t = top_singular(m);
    CHECK(t.sigma == doctest::Approx(power_sigma(m)).epsilon(1e-6));
    // M * right = sigma * left.
    for (std::size_t i = 0; i < r; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += m.at(i, j) * t.right[j];
      CHECK(acc == doctest::Approx(t.sigma * t.left[i]).epsilon(1e-7));
    }
    double ln = 0.0, rn = 0.0;
    for (double v : t.left.data) ln += v * v;
    for (double v : t.right.data) rn += v * v;
    CHECK(ln == doctest::Approx(1.0));
    CHECK(rn == doctest::Approx(1.0));
  }
}

TEST_CASE("solve_spd_right solves X A = B") {
  Rng rng(31);
  Tensor a = random_spd(5, rng);
  Tensor b({3, 5});
  for (double& v : b.data) v = rng.normal();
  Tensor x = solve_spd_right(a, b);
  Tensor back = t_matmul(x, a);
  for (std::size_t i = 0; i < b.numel(); ++i)
    CHECK(back.data[i] == doctest::Approx(b.data[i]).epsilon(1e-8));
  Tensor not_pd = Tensor::matrix(2, 2, {1, 0, 0, -1});
  CHECK_THROWS_AS(solve_spd_right(not_pd, Tensor::matrix(1, 2, {1, 1})), Error);
}

TEST_CASE("invert_square inverts and detects singularity") {
  Tensor a = Tensor::matrix(2, 2, {4, 7, 2, 6});
  Tensor inv = invert_square(a);
  CHECK(inv.at(0, 0) == doctest::Approx(0.6));
  CHECK(inv.at(0, 1) == doctest::Approx(-0.7));
  CHECK(inv.at(1, 0) == doctest::Approx(-0.2));
  CHECK(inv.at(1, 1) == doctest::Approx(0.4));
  Tensor sing = Tensor::matrix(2, 2, {1, 2, 2, 4});
  CHECK_THROWS_AS(invert_square(sing), Error);
}

TEST_CASE("identity") {
  Tensor i = identity(3);
  CHECK(i.at(0, 0) == 1.0);
  CHECK(i.at(0, 1) == 0.0);
  CHECK(t_matmul(i, i).data == i.data);
}
