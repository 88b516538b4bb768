#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>

#include "doctest.h"
#include "splitlab/rng.hpp"
#include "splitlab/tensor.hpp"

using namespace splitlab;

TEST_CASE("matmul known product") {
  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor b = Tensor::matrix(2, 2, {5, 6, 7, 8});
  Tensor c = t_matmul(a, b);
  CHECK(c.at(0, 0) == 19);
  CHECK(c.at(0, 1) == 22);
  CHECK(c.at(1, 0) == 43);
  CHECK(c.at(1, 1) == 50);
  CHECK_THROWS_AS(t_matmul(a, Tensor::matrix(3, 1, {1, 2, 3})), Error);
}

TEST_CASE("elementwise ops and scale") {
  Tensor a = Tensor::matrix(1, 3, {1, -2, 3});
  Tensor b = Tensor::matrix(1, 3, {4, 5, -6});
  CHECK(t_add(a, b).data == std::vector<double>{5, 3, -3});
  CHECK(t_sub(a, b).data == std::vector<double>{-3, -7, 9});
  CHECK(t_mul(a, b).data == std::vector<double>{4, -10, -18});
  CHECK(t_scale(a, -2).data == std::vector<double>{-2, 4, -6});
}

TEST_CASE("sigmoid and silu") {
  Tensor a = Tensor::matrix(1, 2, {0.0, 2.0});
  Tensor s = t_sigmoid(a);
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  Tensor z = t_silu(a);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == doctest::Approx(2.0 / (1.0 + std::exp(-2.0))));
}

TEST_CASE("causal softmax rows are masked distributions") {
  Tensor s = Tensor::matrix(3, 3, {5, 100, -100, 1, 1, 100, 0.5, 0.2, 0.1});
  Tensor p = t_softmax_causal(s);
  CHECK(p.at(0, 0) == 1.0);  // row 0 sees only column 0
  CHECK(p.at(0, 1) == 0.0);
  CHECK(p.at(0, 2) == 0.0);
  CHECK(p.at(1, 2) == 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j <= i; ++j) sum += p.at(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(p.at(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("rmsnorm produces unit rms before gains") {
  Tensor x = Tensor::matrix(2, 4, {1, 2, 3, 4, -1, 0.5, 2, -3});
  Tensor ones = Tensor::vector1d({1, 1, 1, 1});
  Tensor y = t_rmsnorm(x, ones);
  for (std::size_t i = 0; i < 2; ++i) {
    double ms = 0.0;
    for (std::size_t j = 0; j < 4; ++j) ms += y.at(i, j) * y.at(i, j);
    CHECK(ms / 4.0 == doctest::Approx(1.0).epsilon(1e-9));
  }
  Tensor gains = Tensor::vector1d({2, 2, 2, 2});
  Tensor y2 = t_rmsnorm(x, gains);
  for (std::size_t k = 0; k < y.numel(); ++k)
    CHECK(y2.data[k] == doctest::Approx(2.0 * y.data[k]));
}

TEST_CASE("row select, slices, concat, reshape") {
  Tensor table = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  Tensor sel = t_row_select(table, {2, 0, 2});
  CHECK(sel.data == std::vector<double>{5, 6, 1, 2, 5, 6});
  Tensor rows = t_slice_rows(table, 1, 2);
  CHECK(rows.data == std::vector<double>{3, 4, 5, 6});
  Tensor cols = t_slice_cols(table, 1, 1);
  CHECK(cols.data == std::vector<double>{2, 4, 6});
  Tensor cat = t_concat_cols({cols, cols});
  CHECK(cat.shape == std::vector<std::size_t>{3, 2});
  CHECK(cat.data == std::vector<double>{2, 2, 4, 4, 6, 6});
  Tensor r = t_reshape(table, {2, 3});
  CHECK(r.data == table.data);
  CHECK(r.shape == std::vector<std::size_t>{2, 3});
  CHECK_THROWS_AS(t_reshape(table, {4, 2}), Error);
}

TEST_CASE("transpose and sum") {
  Tensor a = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  Tensor t = t_transpose(a);
  CHECK(t.shape == std::vector<std::size_t>{3, 2});
  CHECK(t.at(2, 1) == 6);
  CHECK(t_sum(a) == 21.0);
}

TEST_CASE("cosine distance is exactly zero for identical tensors") {
  Rng rng(3);
  Tensor a({5, 7});
  for (double& v : a.data) v = rng.normal();
  Tensor b = a;  // bitwise copy
  CHECK(cosine_row_distance(a, b) == 0.0);
}

TEST_CASE("cosine distance handles zero rows and opposite rows") {
  Tensor a = Tensor::matrix(1, 2, {0, 0});
  Tensor b = Tensor::matrix(1, 2, {1, 1});
  CHECK(cosine_row_distance(a, b) == 1.0);
  Tensor c = Tensor::matrix(1, 2, {1, 0});
  Tensor d = Tensor::matrix(1, 2, {-1, 0});
  CHECK(cosine_row_distance(c, d) == doctest::Approx(2.0));
  Tensor e = Tensor::matrix(1, 2, {0, 3});
  Tensor f = Tensor::matrix(1, 2, {4, 0});
  CHECK(cosine_row_distance(e, f) == doctest::Approx(1.0));
}

TEST_CASE("euclidean row distance mean of squared norms") {
  Tensor a = Tensor::matrix(2, 2, {0, 0, 1, 1});
  Tensor b = Tensor::matrix(2, 2, {3, 4, 1, 1});
  CHECK(euclidean_row_distance(a, b) == doctest::Approx(12.5));
}

TEST_CASE("norms") {
  Tensor a = Tensor::matrix(1, 2, {3, 4});
  CHECK(frobenius_norm(a) == doctest::Approx(5.0));
  CHECK(l2_norm(a) == doctest::Approx(5.0));
}

TEST_CASE("rng streams are reproducible and counter-based") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42), d(43);
  bool differ = false;
  for (int i = 0; i < 10; ++i)
    if (c.next_u64() != d.next_u64()) differ = true;
  CHECK(differ);
}

TEST_CASE("rng derive gives independent deterministic streams") {
  Rng base(7);
  Rng s1 = base.derive(1);
  Rng s2 = base.derive(2);
  Rng s1_again = base.derive(1);
  CHECK(s1.next_u64() == s1_again.next_u64());
  CHECK(s1.next_u64() != s2.next_u64());
  // Deriving never disturbs the parent stream.
  Rng fresh(7);
  CHECK(base.next_u64() == fresh.next_u64());
}

TEST_CASE("rng uniform stays in (0,1) and normal has sane moments") {
  Rng rng(11);
  double mean = 0.0, var = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = rng.normal();
  for (double x : xs) mean += x;
  mean /= n;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= n - 1;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("tensor validation") {
  CHECK_THROWS_AS(Tensor::matrix(2, 2, {1, 2, 3}), Error);
  Tensor a = Tensor::matrix(1, 2, {1, std::numeric_limits<double>::infinity()});
  CHECK(!a.all_finite());
  CHECK_THROWS_AS(require_finite(a, "test"), Error);
}
