#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "hge/tape.hpp"

namespace hge {

// Context decoder trainables for one hierarchy level. The (context node,
// group) table is factorized additively: Q[j,k] = q_node[j] + q_grp[k], which
// keeps both dependencies at |V|*d + K*d parameters.
struct ContextTable {
  Tensor q_node;  // [V x d]
  Tensor q_grp;   // [K x d]
};

struct ContextVars {
  Var q_node;
  Var q_grp;
};

// A frozen selection of skip-gram terms for one batch and level. Pair p reads
// its target's state row and relaxed-assignment row, scores the positive
// context node pos_ctx[p] and the negative neg ctx node of the same slot.
struct ContextBatch {
  std::vector<int> state_rows;   // per pair: row into the level's state matrix
  std::vector<int> assign_rows;  // per pair: row into the level's z matrix
  std::vector<int> pos_ctx;      // per pair: context node id
  std::vector<int> neg_ctx;      // per pair: negative node id

  std::size_t size() const { return pos_ctx.size(); }
};

// Mean over pairs of -log sigma(h.Q_pos) - log sigma(-h.Q_neg), logits
// clamped to [-30, 30]. membership_agnostic drops the group component of Q
// (the decoder ablation).
Var context_loss(Tape& tp, Var states, Var z, const ContextVars& q, const ContextBatch& batch,
                 bool membership_agnostic = false);

// Inter-layer constraint pairs over one batch's node rows.
struct LinkSets {
  std::vector<std::pair<int, int>> must;    // same lower-level group
  std::vector<std::pair<int, int>> cannot;  // different upper-level group
};

// Filters candidate pairs by hard assignments: must-links agree at the lower
// level, cannot-links disagree at the upper level. Each set is capped by a
// seeded random subsample.
LinkSets build_links(const std::vector<int>& z_lower_hard, const std::vector<int>& z_upper_hard,
                     const std::vector<std::pair<int, int>>& candidate_pairs, int must_cap,
                     int cannot_cap, std::uint64_t seed);

enum class RegNorm { mean, sum };

// Differentiable relaxation of the indicator penalties:
//   sum_must gamma*(1 - zu_i . zu_j) + sum_cannot beta*(zl_i . zl_j)
// Exactly the indicator sum when assignments are one-hot.
Var reg_loss(Tape& tp, const LinkSets& links, Var z_lower, Var z_upper, double gamma, double beta,
             RegNorm norm = RegNorm::mean);

// Linear softmax head over concatenated layer states; cross-entropy on rows
// whose label is >= 0 (train-fold nodes only).
Var classification_loss(Tape& tp, Var embeddings, Var head_w, Var head_b,
                        std::vector<int> labels);

struct LossBreakdown {
  std::vector<double> context;  // per level
  std::vector<double> reg;      // per level boundary
  double classification = 0.0;
  double total = 0.0;
};

struct TotalLoss {
  Var var;
  LossBreakdown values;
};

// L = sum_l context_l + sum_l reg_l (+ weight * classification).
TotalLoss total_loss(Tape& tp, const std::vector<Var>& context_terms,
                     const std::vector<Var>& reg_terms, std::optional<Var> classification,
                     double classification_weight);

}  // namespace hge
