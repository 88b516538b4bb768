#include "splitlab/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace splitlab {

namespace {
std::size_t shape_numel(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
  data.assign(shape_numel(shape), 0.0);
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data = {v};
  return t;
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> vals) {
  require(vals.size() == r * c, "matrix: value count does not match shape");
  Tensor t;
  t.shape = {r, c};
  t.data = std::move(vals);
  return t;
}

Tensor Tensor::vector1d(std::vector<double> vals) {
  Tensor t;
  t.shape = {vals.size()};
  t.data = std::move(vals);
  return t;
}

std::size_t Tensor::rows() const {
  require(shape.size() == 2, "rows: tensor is not 2-D");
  return shape[0];
}

std::size_t Tensor::cols() const {
  require(shape.size() == 2, "cols: tensor is not 2-D");
  return shape[1];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_str(const Tensor& t) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < t.shape.size(); ++i)
    os << (i ? "," : "") << t.shape[i];
  os << "]";
  return os.str();
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw Error(std::string(op) + ": non-finite output");
}

Tensor t_matmul(const Tensor& a, const Tensor& b) {
  require(a.shape.size() == 2 && b.shape.size() == 2 && a.cols() == b.rows(),
          "matmul: shape mismatch " + shape_str(a) + " x " + shape_str(b));
  std::size_t p = a.rows(), q = a.cols(), r = b.cols();
  Tensor out({p, r});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < q; ++k) {
      double av = a.at(i, k);
      if (av == 0.0) continue;
      const double* brow = &b.data[k * r];
      double* orow = &out.data[i * r];
      for (std::size_t j = 0; j < r; ++j) orow[j] += av * brow[j];
    }
  return out;
}

Tensor t_add(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "add: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor t_sub(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "sub: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor t_mul(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), "mul: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor t_scale(const Tensor& a, double c) {
  Tensor out = a;
  for (double& v : out.data) v *= c;
  return out;
}

Tensor t_sigmoid(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

Tensor t_silu(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v = v / (1.0 + std::exp(-v));
  return out;
}

Tensor t_transpose(const Tensor& a) {
  std::size_t r = a.rows(), c = a.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

Tensor t_softmax_causal(const Tensor& scores) {
  require(scores.shape.size() == 2 && scores.rows() == scores.cols(),
          "softmax_causal: expects square L x L scores");
  std::size_t n = scores.rows();
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = scores.at(i, 0);
    for (std::size_t j = 1; j <= i; ++j) mx = std::max(mx, scores.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      double e = std::exp(scores.at(i, j) - mx);
      out.at(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j <= i; ++j) out.at(i, j) /= denom;
  }
  return out;
}

Tensor t_rmsnorm(const Tensor& x, const Tensor& gains) {
  require(x.shape.size() == 2, "rmsnorm: expects 2-D input");
  require(gains.shape.size() == 1 && gains.shape[0] == x.cols(),
          "rmsnorm: gain length must equal column count");
  std::size_t r = x.rows(), c = x.cols();
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    double ms = 0.0;
    for (std::size_t j = 0; j < c; ++j) ms += x.at(i, j) * x.at(i, j);
    double inv = 1.0 / std::sqrt(ms / static_cast<double>(c) + kRmsEps);
    for (std::size_t j = 0; j < c; ++j)
      out.at(i, j) = x.at(i, j) * inv * gains[j];
  }
  return out;
}

Tensor t_row_select(const Tensor& table, const std::vector<int>& ids) {
  std::size_t v = table.rows(), c = table.cols();
  Tensor out({ids.size(), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < v,
            "row_select: id out of range");
    for (std::size_t j = 0; j < c; ++j)
      out.at(i, j) = table.at(static_cast<std::size_t>(ids[i]), j);
  }
  return out;
}

Tensor t_slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  require(start + count <= a.rows(), "slice_rows: out of range");
  std::size_t c = a.cols();
  Tensor out({count, c});
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) = a.at(start + i, j);
  return out;
}

Tensor t_slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require(start + count <= a.cols(), "slice_cols: out of range");
  std::size_t r = a.rows();
  Tensor out({r, count});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out.at(i, j) = a.at(i, start + j);
  return out;
}

Tensor t_concat_cols(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: empty part list");
  std::size_t r = parts[0].rows(), total = 0;
  for (const Tensor& p : parts) {
    require(p.rows() == r, "concat_cols: row mismatch");
    total += p.cols();
  }
  Tensor out({r, total});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out.at(i, off + j) = p.at(i, j);
    off += p.cols();
  }
  return out;
}

Tensor t_reshape(const Tensor& a, std::vector<std::size_t> shape) {
  require(shape_numel(shape) == a.numel(), "reshape: element count mismatch");
  Tensor out;
  out.shape = std::move(shape);
  out.data = a.data;
  return out;
}

double t_sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v;
  return s;
}

double cosine_row_distance(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b) && a.shape.size() == 2,
          "cosine_row_distance: shape mismatch");
  std::size_t r = a.rows(), c = a.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      dot += a.at(i, j) * b.at(i, j);
      na += a.at(i, j) * a.at(i, j);
      nb += b.at(i, j) * b.at(i, j);
    }
    if (na == 0.0 || nb == 0.0) {
      total += 1.0;  // zero-norm row: distance 1, documented
      continue;
    }
    total += 1.0 - dot / std::sqrt(na * nb);
  }
  return total / static_cast<double>(r);
}

double euclidean_row_distance(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b) && a.shape.size() == 2,
          "euclidean_row_distance: shape mismatch");
  std::size_t r = a.rows(), c = a.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double d = a.at(i, j) - b.at(i, j);
      d2 += d * d;
    }
    total += d2;
  }
  return total / static_cast<double>(r);
}

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

double l2_norm(const Tensor& a) { return frobenius_norm(a); }

}  // namespace splitlab
