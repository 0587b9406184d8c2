#include "hge/adam.hpp"

#include <cmath>

#include "hge/common.hpp"

namespace hge {

AdamState adam_init(const std::vector<const Tensor*>& params, AdamConfig cfg) {
  AdamState st;
  st.cfg = cfg;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Tensor* p : params) {
    st.m.push_back(Tensor::zeros(p->shape()));
    st.v.push_back(Tensor::zeros(p->shape()));
  }
  return st;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const std::vector<double>& weight_decay) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DimensionError("adam_step: parameter/gradient/state count mismatch");
  state.step += 1;
  const AdamConfig& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    if (!p.same_shape(g)) throw shape_error("adam_step", p, g);
    const double wd = i < weight_decay.size() ? weight_decay[i] : 0.0;
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::int64_t k = 0; k < p.size(); ++k) {
      double gk = g[k];
      if (!std::isfinite(gk)) throw NumericError("adam_step: non-finite gradient");
      gk += wd * p[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace hge
