#include "motionact/adam.hpp"

#include <cmath>

namespace motionact {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg) {
  if (!param.same_shape(grad))
    fail("adam_step: shape mismatch " + shape_str(param.shape) + " vs " + shape_str(grad.shape));
  if (state.m.data.empty()) {
    state.m = Tensor(param.shape);
    state.v = Tensor(param.shape);
  }
  state.step++;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (int64_t i = 0; i < param.numel(); i++) {
    double g = grad.data[i];
    state.m.data[i] = cfg.beta1 * state.m.data[i] + (1.0 - cfg.beta1) * g;
    state.v.data[i] = cfg.beta2 * state.v.data[i] + (1.0 - cfg.beta2) * g * g;
    double mhat = state.m.data[i] / bc1;
    double vhat = state.v.data[i] / bc2;
    param.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

}  // namespace motionact
