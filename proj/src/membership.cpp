#include "hge/membership.hpp"

#include <cmath>

#include "hge/rng.hpp"

namespace hge {

namespace {
// keeps log(pi) finite when a membership entry underflows to zero
constexpr double kMembershipFloor = 1e-30;
}  // namespace

Var membership_logits(Tape& tp, Var phi, Var states) {
  return tp.matmul_nt(states, phi);
}

Var membership_logits(Tape& tp, Var phi, const SparseRows* features) {
  return tp.feature_matmul(phi, features);
}

Var gumbel_softmax(Tape& tp, Var pi, const Tensor& noise, double tau) {
  if (tau <= 0.0) throw ContractError("gumbel_softmax: tau must be positive");
  if (!tp.val(pi).same_shape(noise)) throw shape_error("gumbel_softmax", tp.val(pi), noise);
  Var shifted = tp.add(tp.log(pi, kMembershipFloor), tp.constant(noise));
  return tp.softmax(tp.affine(shifted, 1.0 / tau, 0.0));
}

Tensor gumbel_noise(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed_tag(seed, "gumbel"));
  Tensor g = Tensor::zeros({rows, cols});
  for (std::int64_t i = 0; i < g.size(); ++i) g[i] = rng.gumbel();
  return g;
}

std::vector<double> apply_gumbel(std::span<const double> pi, std::span<const double> noise,
                                 double tau) {
  if (tau <= 0.0) throw ContractError("apply_gumbel: tau must be positive");
  const std::size_t k = pi.size();
  std::vector<double> z(k);
  double m = -1e300;
  for (std::size_t i = 0; i < k; ++i) {
    z[i] = (std::log(std::max(pi[i], kMembershipFloor)) + noise[i]) / tau;
    m = std::max(m, z[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    z[i] = std::exp(z[i] - m);
    sum += z[i];
  }
  for (std::size_t i = 0; i < k; ++i) z[i] /= sum;
  return z;
}

std::vector<double> gumbel_softmax_sample(std::span<const double> pi, double tau,
                                          std::uint64_t seed) {
  Rng rng(seed_tag(seed, "gumbel"));
  std::vector<double> noise(pi.size());
  for (auto& g : noise) g = rng.gumbel();
  return apply_gumbel(pi, noise, tau);
}

int hard_assignment(std::span<const double> pi) {
  if (pi.empty()) throw ContractError("hard_assignment: empty membership row");
  int best = 0;
  for (std::size_t i = 1; i < pi.size(); ++i)
    if (pi[i] > pi[best]) best = static_cast<int>(i);
  return best;
}

double concentration(std::span<const double> pi) {
  if (pi.empty()) throw ContractError("concentration: empty membership row");
  const double k = static_cast<double>(pi.size());
  double mean = 0.0;
  for (double v : pi) mean += v;
  mean /= k;
  double var = 0.0;
  for (double v : pi) var += (v - mean) * (v - mean);
  return var / k;
}

Tensor dirichlet_rows(const Tensor& alpha_rows, std::uint64_t seed) {
  Rng rng(seed_tag(seed, "dirichlet"));
  Tensor out = Tensor::zeros(alpha_rows.shape());
  const int rows = alpha_rows.rows();
  const int k = alpha_rows.cols();
  for (int r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      double draw = rng.gamma(std::max(alpha_rows.at(r, j), 1e-6));
      out.at(r, j) = draw;
      sum += draw;
    }
    for (int j = 0; j < k; ++j) out.at(r, j) /= sum;
  }
  return out;
}

}  // namespace hge
