#include "splitlab/adam.hpp"

#include <cmath>

namespace splitlab {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state) {
  require(param.same_shape(grad), "adam_step: shape mismatch");
  if (state.m.numel() == 0) {
    state.m = Tensor(param.shape);
    state.v = Tensor(param.shape);
  }
  require(state.m.same_shape(param), "adam_step: state shape mismatch");
  state.step += 1;
  double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < param.numel(); ++i) {
    double g = grad.data[i];
    state.m.data[i] = state.beta1 * state.m.data[i] + (1.0 - state.beta1) * g;
    state.v.data[i] = state.beta2 * state.v.data[i] + (1.0 - state.beta2) * g * g;
    double mhat = state.m.data[i] / b1t;
    double vhat = state.v.data[i] / b2t;
    param.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
  require_finite(param, "adam_step");
}

}  // namespace splitlab
