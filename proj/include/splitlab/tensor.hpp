#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace splitlab {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major tensor of 64-bit floats.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);
  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor scalar(double v);
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> vals);
  static Tensor vector1d(std::vector<double> vals);

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool is_scalar() const { return numel() == 1 && shape.empty(); }

  double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
};

std::string shape_str(const Tensor& t);
void require(bool cond, const std::string& msg);
void require_finite(const Tensor& t, const char* op);

// Raw kernels. The tape wraps exactly these, so traced and untraced
// forwards are bitwise identical.
Tensor t_matmul(const Tensor& a, const Tensor& b);
Tensor t_add(const Tensor& a, const Tensor& b);
Tensor t_sub(const Tensor& a, const Tensor& b);
Tensor t_mul(const Tensor& a, const Tensor& b);
Tensor t_scale(const Tensor& a, double c);
Tensor t_sigmoid(const Tensor& a);
Tensor t_silu(const Tensor& a);
Tensor t_transpose(const Tensor& a);
Tensor t_softmax_causal(const Tensor& scores);  // L x L, row i attends to j <= i
Tensor t_rmsnorm(const Tensor& x, const Tensor& gains);
Tensor t_row_select(const Tensor& table, const std::vector<int>& ids);
Tensor t_slice_rows(const Tensor& a, std::size_t start, std::size_t count);
Tensor t_slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor t_concat_cols(const std::vector<Tensor>& parts);
Tensor t_reshape(const Tensor& a, std::vector<std::size_t> shape);
double t_sum(const Tensor& a);

// Mean over rows of (1 - cosine similarity). A zero-norm row on either
// side contributes distance 1 for that row.
double cosine_row_distance(const Tensor& a, const Tensor& b);
// Mean squared Euclidean row distance.
double euclidean_row_distance(const Tensor& a, const Tensor& b);

double frobenius_norm(const Tensor& a);
double l2_norm(const Tensor& a);

constexpr double kRmsEps = 1e-12;

}  // namespace splitlab
