#pragma once

#include "motionact/tensor.hpp"

namespace motionact {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Tensor m;
  Tensor v;
  int64_t step = 0;  // completed steps
};

// One bias-corrected Adam update. State tensors are allocated on first use.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg);

}  // namespace motionact
