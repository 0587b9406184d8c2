#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hge/common.hpp"

namespace hge {

// All hyperparameters, defaulting to the standard protocol: two 64-dim
// layers (128-dim composed embedding), 12/5 groups, 25/25 fan-out, 50 walks
// per node with window 2 and one negative per positive.
struct TrainConfig {
  int layer_count = 2;
  std::vector<int> group_counts = {12, 5};
  std::vector<int> hidden_dims = {64, 64};
  int heads = 4;

  double tau = 0.5;
  bool tau_anneal = false;  // linear 1.0 -> 0.1 over the epoch budget

  double gamma = 1.0;
  double beta = 0.1;

  std::vector<int> fanouts = {25, 25};
  int walks_per_node = 50;
  int walk_length = 5;
  int window = -1;  // -1: follows layer_count; otherwise must equal it
  int negative_ratio = 1;

  double learning_rate = 0.005;
  double weight_decay = 5e-4;  // applied to W and attention vectors only
  int epochs = 200;
  int batch_size = 256;
  int early_stop_patience = 20;
  std::uint64_t seed = 1;

  bool disable_lambda = false;       // ablation: group attention uniform
  bool membership_agnostic_q = false;  // ablation: context table loses group part
  bool disable_reg = false;          // ablation: no inter-layer constraints
  double classification_weight = 1.0;

  int context_pairs_per_target = 20;  // per batch subsample of skip-gram terms
  int must_cap = 256;
  int cannot_cap = 256;
  bool include_self = true;       // append the target to its own sample
  bool hard_group_lookup = false;  // argmax lookup instead of relaxed mix
  bool dirichlet_sample = false;  // stochastic memberships (analysis only)
  bool two_phase = false;         // fine-tune from a pretrained state
  bool log_timing = true;         // include wall-time in the metrics stream

  int effective_window() const { return window < 0 ? layer_count : window; }
  double tau_at(int epoch) const;

  // Throws ConfigError on any invariant violation (strictly decreasing group
  // counts, positive counts, window/layer agreement, ...).
  void validate() const;

  std::string to_json_string() const;
  static TrainConfig from_json_string(const std::string& text);
  static TrainConfig from_json_file(const std::string& path);

  // FNV-1a of the canonical JSON dump; checkpoints key on it.
  std::string hash() const;
};

}  // namespace hge
