#pragma once

#include <vector>

#include "hge/tensor.hpp"

namespace hge {

struct AdamConfig {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moments mirror parameter shapes; the step counter is
// the number of updates applied so far.
struct AdamState {
  AdamConfig cfg;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

AdamState adam_init(const std::vector<const Tensor*>& params, AdamConfig cfg = {});

// In-place update. weight_decay is per-parameter L2 added to the gradient
// (empty means none). Throws NumericError on non-finite gradients.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const std::vector<double>& weight_decay = {});

}  // namespace hge
