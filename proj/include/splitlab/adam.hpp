#pragma once

#include <cstdint>

#include "splitlab/tensor.hpp"

namespace splitlab {

struct AdamState {
  Tensor m;  // first moment, lazily sized to the parameter
  Tensor v;  // second moment
  std::int64_t step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(double learning_rate = 0.01) : lr(learning_rate) {}
};

// Standard Adam with bias correction; advances the state in place.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state);

}  // namespace splitlab
