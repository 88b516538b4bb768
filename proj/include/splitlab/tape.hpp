#pragma once

#include <functional>
#include <vector>

#include "splitlab/tensor.hpp"

namespace splitlab {

struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class OpKind {
  Matmul,
  Add,
  Mul,
  Sigmoid,
  SoftmaxCausal,
  RmsNorm,
  RowSelect,
  Reshape,
  Scale,
  Sum,
  CosineDistance,
};

// Reverse-mode tape over the fixed primitive set. Values are handles into
// the tape; backward replays recorded closures in reverse creation order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value leaf(Tensor t, bool requires_grad = false);

  Value matmul(Value a, Value b);
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value scale(Value a, double c);
  Value sigmoid(Value a);
  Value silu(Value a);
  Value transpose(Value a);
  Value softmax_causal(Value scores);
  Value rmsnorm(Value x, Value gains);
  Value row_select(Value table, std::vector<int> ids);
  Value slice_rows(Value a, std::size_t start, std::size_t count);
  Value slice_cols(Value a, std::size_t start, std::size_t count);
  Value concat_cols(std::vector<Value> parts);
  Value reshape(Value a, std::vector<std::size_t> shape);
  Value sum(Value a);
  Value cosine_distance(Value a, Value b);
  Value euclidean_distance(Value a, Value b);
  // Mean next-token cross entropy: logits row i scored against targets[i+1].
  Value cross_entropy_next(Value logits, std::vector<int> targets);

  // Uniform entry point over the primitive op kinds. aux_ids feeds
  // RowSelect, aux_shape feeds Reshape, aux_scalar feeds Scale.
  Value forward_op(OpKind kind, const std::vector<Value>& inputs,
                   const std::vector<int>& aux_ids = {},
                   const std::vector<std::size_t>& aux_shape = {},
                   double aux_scalar = 0.0);

  const Tensor& val(Value v) const;
  std::size_t size() const { return nodes_.size(); }

  // Backward from a scalar output. Gradients accumulate for every node
  // reachable from a grad-marked leaf.
  void backward(Value output);
  // Backward seeded with an explicit cotangent on an arbitrary output.
  void backward_cotangent(Value output, const Tensor& cotangent);
  void zero_grads();

  bool has_grad(Value v) const;
  const Tensor& grad(Value v) const;

 private:
  using BackFn = std::function<void(Tape&, const Tensor&)>;

  struct Node {
    Tensor value;
    BackFn back;       // null for constants and leaves
    bool needs_grad = false;
  };

  Value record(Tensor value, bool needs_grad, BackFn back, const char* op);
  void accumulate(int id, const Tensor& g);
  void run_backward(Value output, const Tensor& cotangent);
  bool needs(Value v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<char> grad_set_;
};

// Materialized Jacobian of f at z, row-vector convention:
// J[i][j] = d out_j / d z_i, shape (numel(z), numel(f(z))).
constexpr std::size_t kJacobianDimCap = 4096;
Tensor jacobian(const std::function<Value(Tape&, Value)>& f, const Tensor& z,
                std::size_t dim_cap = kJacobianDimCap);

}  // namespace splitlab
