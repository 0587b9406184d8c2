#include "hge/gradcheck.hpp"

#include <cmath>

#include "hge/common.hpp"

namespace hge {

GradCheckReport grad_check(const LossFn& loss_fn, const std::vector<Tensor*>& params,
                           double eps) {
  std::vector<Tensor> grads;
  loss_fn(&grads);
  if (grads.size() != params.size())
    throw DimensionError("grad_check: loss_fn returned wrong gradient count");

  GradCheckReport rep;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    for (std::int64_t k = 0; k < t.size(); ++k) {
      const double saved = t[k];
      t[k] = saved + eps;
      const double fp = loss_fn(nullptr);
      t[k] = saved - eps;
      const double fm = loss_fn(nullptr);
      t[k] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = grads[p][k];
      const double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_param = static_cast<int>(p);
        rep.worst_coord = k;
        rep.analytic = analytic;
        rep.numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace hge
