#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hge/config.hpp"
#include "hge/graph.hpp"
#include "hge/layer.hpp"
#include "hge/objective.hpp"
#include "hge/sampling.hpp"

namespace hge {

struct NamedParam {
  std::string name;
  Tensor* tensor;
  bool decay;  // weight decay applies to W and attention vectors only
};

// The full trainable state: group embeddings, aggregation layers, context
// tables and the optional classification head.
struct ModelParams {
  TrainConfig cfg;
  int input_dim = 0;
  int node_count = 0;
  int class_count = 0;  // 0 disables the head

  std::vector<Tensor> group_embeddings;  // per level [K_l x in_dim_l]
  std::vector<LayerParams> layers;       // per level
  std::vector<ContextTable> contexts;    // per level
  Tensor head_w;                         // [C x composed_dim]
  Tensor head_b;                         // [C]

  int level_in_dim(int level) const {
    return level == 0 ? input_dim : cfg.hidden_dims[level - 1];
  }
  int level_out_dim(int level) const { return cfg.hidden_dims[level]; }
  int composed_dim() const;

  // Stable iteration order shared by the optimizer and checkpoints.
  std::vector<NamedParam> registry();
};

ModelParams init_params(const TrainConfig& cfg, int input_dim, int node_count, int class_count,
                        std::uint64_t seed);

struct ModelVars {
  std::vector<Var> phi;
  std::vector<LayerVars> layers;
  std::vector<ContextVars> contexts;
  Var head_w;
  Var head_b;
  std::vector<Var> flat;  // registry order, parallel to ModelParams::registry()
};

// Registers every parameter as a tape leaf (by reference; params must outlive
// the tape).
ModelVars bind_vars(Tape& tp, ModelParams& params);

// Per-node buckets of one scope's walk context, built once per training run.
struct ContextIndex {
  std::vector<std::vector<int>> contexts_of;
  std::vector<std::vector<int>> negatives_of;
};
ContextIndex index_context(const WalkContext& ctx, int node_count);

struct LevelPlan {
  std::vector<int> nodes;  // source node ids; the level above occupies the prefix
  FanoutIndex fanout;
  Tensor gumbel;  // [|nodes| x K_l]
  ContextBatch ctx;
};

// Every sampling decision for one minibatch, frozen up front so the loss is a
// deterministic function of the parameters.
struct BatchPlan {
  std::vector<int> targets;
  std::vector<int> labels;  // per target; -1 masks a row
  std::vector<LevelPlan> levels;
  SparseRows base_features;  // feature rows of levels[0].nodes
  std::vector<std::vector<std::pair<int, int>>> link_candidates;  // per boundary
  std::uint64_t link_seed = 0;
  std::uint64_t noise_seed = 0;
  std::optional<std::vector<LinkSets>> frozen_links;  // grad-check freezing
};

// contexts has one entry per level; labels_of_graph may be empty (no head).
BatchPlan plan_batch(const Graph& g, const std::vector<ContextIndex>& contexts,
                     std::vector<int> targets, const std::vector<int>& labels_of_graph,
                     const TrainConfig& cfg, std::uint64_t seed);

struct ForwardResult {
  std::vector<Var> pi;
  std::vector<Var> z;
  std::vector<Var> states;  // per level output; batch targets are the row prefix
  std::vector<AttentionRecord> attention;
  Var target_embedding;  // [B x composed_dim], layer states concatenated
};

ForwardResult forward_batch(Tape& tp, const ModelParams& params, const ModelVars& vars,
                            const BatchPlan& plan, double tau, bool record_attention = false);

// Joint objective on the planned batch. classification_weight < 0 uses the
// config value; 0 drops the head term.
TotalLoss batch_loss(Tape& tp, const ModelParams& params, const ModelVars& vars,
                     const BatchPlan& plan, const ForwardResult& fwd,
                     double classification_weight = -1.0);

// Builds the link sets from the current assignments and pins them into the
// plan (used by the gradient-check fixture so the loss stays smooth).
void freeze_links(const ModelParams& params, BatchPlan& plan, Tape& tp, const ForwardResult& fwd);

}  // namespace hge
