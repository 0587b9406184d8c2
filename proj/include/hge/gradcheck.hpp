#pragma once

#include <functional>
#include <vector>

#include "hge/tensor.hpp"

namespace hge {

// Evaluates the loss at the current parameter values; when grads is non-null,
// also fills one gradient tensor per parameter (same order as the parameter
// list handed to grad_check). Must be deterministic: all sampling frozen.
using LossFn = std::function<double(std::vector<Tensor>* grads)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  int worst_param = -1;
  std::int64_t worst_coord = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central differences (f(t+e)-f(t-e))/2e against the analytic gradients.
// Relative error per coordinate is |analytic-numeric| / max(1, |numeric|).
GradCheckReport grad_check(const LossFn& loss_fn, const std::vector<Tensor*>& params,
                           double eps = 1e-4);

}  // namespace hge
