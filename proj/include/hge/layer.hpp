#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "hge/tape.hpp"

namespace hge {

// Trainables of one aggregation layer (multi-head). The node- and
// group-attention vectors are kept separate so the two relatednesses stay
// independent; each has dimension 2*d_out (target half, source half).
struct LayerParams {
  int heads = 1;
  std::vector<Tensor> weight;  // per head [d_out x d_in]
  std::vector<Tensor> a_node;  // per head [2*d_out]
  std::vector<Tensor> a_grp;   // per head [2*d_out]

  int out_dim() const { return weight.empty() ? 0 : weight[0].shape()[0]; }
  int in_dim() const { return weight.empty() ? 0 : weight[0].shape()[1]; }
};

// Tape handles for one layer's trainables, same layout as LayerParams.
struct LayerVars {
  std::vector<Var> weight;
  std::vector<Var> a_node;
  std::vector<Var> a_grp;
};

struct AggregateOptions {
  double slope = 0.2;
  bool nonlinearity = true;     // ELU; identity when false (test hook)
  bool uniform_lambda = false;  // group attention dropped (ablation)
};

// Per (target, neighbor, head) attention coefficients of one aggregation.
struct AttentionRecord {
  std::vector<std::shared_ptr<AttentionStash>> heads;
};

// Softmax over LeakyReLU(a^T [p_target || p_j]) across the neighbor rows.
Var attention_weights(Tape& tp, Var p_target, Var p_neighbors, Var a, double slope = 0.2);

// Source states feeding a layer: dense tape matrix or constant sparse rows.
using SourceStates = std::variant<Var, const SparseRows*>;

// Dual-attention aggregation for a batch of targets over fixed fan-out
// neighbor samples. z holds one relaxed assignment row per source; the group
// vector of a node is its z-weighted mix of group embeddings.
Var aggregate(Tape& tp, const SourceStates& h_prev, Var z, Var phi, const LayerVars& params,
              const FanoutIndex& fanout, const AggregateOptions& opt,
              AttentionRecord* record = nullptr);

// Single-target reference route; same math as aggregate() at op granularity,
// kept for contract tests and fixtures.
Var aggregate_single(Tape& tp, Var h_target, Var h_neighbors, Var z_target, Var z_neighbors,
                     Var phi, const LayerVars& params, const AggregateOptions& opt);

}  // namespace hge
