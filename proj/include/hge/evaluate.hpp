#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hge/metrics.hpp"
#include "hge/trainer.hpp"

namespace hge {

// Deterministic full-graph forward pass over complete neighborhoods: no
// sampling, no Gumbel noise (assignments relax to softmax(pi/tau)).
struct InferenceResult {
  Tensor embeddings;                   // [V x composed_dim]
  std::vector<Tensor> level_states;    // per level [V x d_l]
  std::vector<Tensor> pi;              // per level [V x K_l]
  std::vector<std::vector<int>> hard;  // per level argmax group
};

// Observes every (level, target, neighbor, head, alpha, lambda) coefficient.
using AttentionObserver =
    std::function<void(int level, int target, int neighbor, int head, double alpha, double lambda)>;

InferenceResult infer_full(const ModelParams& params, const Graph& g,
                           const AttentionObserver& observer = nullptr);

// Head predictions from a full-graph inference (requires the head).
std::vector<int> predict_classes(const ModelParams& params, const InferenceResult& inf);

// Head-averaged KL(alpha||lambda) per node and level.
std::vector<std::vector<double>> attention_divergence_full(const ModelParams& params,
                                                           const Graph& g);

// Copies every non-head tensor of a pretrained state into a fresh init (the
// fine-tuning warm start); optimizer moments restart at zero.
TrainInit warm_start(const ModelParams& pretrained, const TrainConfig& cfg, const Graph& g,
                     int class_count);

struct NodeClassificationReport {
  std::vector<ClassificationMetrics> per_fold;
  ClassificationMetrics mean;
  ClassificationMetrics stdev;
  std::vector<int> best_epochs;
};

// Five-fold protocol: per fold, joint training with the multitask head on the
// fold's train nodes, then metrics on its test nodes. warm supplies a
// pretrained state (two-phase); jobs > 1 runs folds on threads (each fold is
// single-threaded and deterministic on its own).
NodeClassificationReport eval_node_classification(const TrainConfig& cfg, const Graph& g,
                                                  const SplitAssignment& split,
                                                  const ModelParams* warm = nullptr,
                                                  int jobs = 1);

struct LinkPredictionReport {
  LinkMetrics metrics;
  int holdout_edges = 0;
  int negatives_per_candidate = 0;
};

// Removes a seeded fraction of edges, trains unsupervised on the rest, and
// ranks each held-out edge against sampled non-neighbors by first-layer
// embedding dot product.
LinkPredictionReport eval_link_prediction(const TrainConfig& cfg, const Graph& g,
                                          double holdout_fraction, int negatives,
                                          const ModelParams* warm = nullptr);

// CSV exporters; byte-stable for a fixed checkpoint.
void export_embeddings_csv(const ModelParams& params, const Graph& g, const std::string& path);
void export_memberships_csv(const ModelParams& params, const Graph& g, const std::string& path);
void export_attention_csv(const ModelParams& params, const Graph& g, const std::string& path);

}  // namespace hge
