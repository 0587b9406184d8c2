#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hge/tape.hpp"

namespace hge {

// --- differentiable paths -------------------------------------------------

// Affinity logits of each state row toward every group: states * phi^T.
Var membership_logits(Tape& tp, Var phi, Var states);
Var membership_logits(Tape& tp, Var phi, const SparseRows* features);

// pi rows: softmax of the affinity logits (the mean of the stated Dirichlet,
// since its concentration sums to one).
inline Var membership_distribution(Tape& tp, Var phi, Var states) {
  return tp.softmax(membership_logits(tp, phi, states));
}
inline Var membership_distribution(Tape& tp, Var phi, const SparseRows* features) {
  return tp.softmax(membership_logits(tp, phi, features));
}

// Relaxed one-hot rows z = softmax((log pi + g)/tau), the categorical
// reparameterization: argmax z is distributed exactly Multinomial(pi). The
// noise g is a frozen constant per batch so gradients flow through pi only.
Var gumbel_softmax(Tape& tp, Var pi, const Tensor& noise, double tau);

// --- plain (non-tape) paths ------------------------------------------------

Tensor gumbel_noise(int rows, int cols, std::uint64_t seed);

// Single-row relaxed sample; deterministic per seed.
std::vector<double> gumbel_softmax_sample(std::span<const double> pi, double tau,
                                          std::uint64_t seed);

// z ∝ exp((log pi + g)/tau) for a given noise row (g = 0 recovers the
// tempered membership pi^(1/tau), normalized).
std::vector<double> apply_gumbel(std::span<const double> pi, std::span<const double> noise,
                                 double tau);

// argmax with ties broken toward the lowest index.
int hard_assignment(std::span<const double> pi);

// Population variance of the membership entries; low variance marks a
// boundary node with flat affiliation.
double concentration(std::span<const double> pi);

// Stochastic Dirichlet draw per row (analysis only, no gradients).
Tensor dirichlet_rows(const Tensor& alpha_rows, std::uint64_t seed);

}  // namespace hge
