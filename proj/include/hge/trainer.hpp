#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hge/adam.hpp"
#include "hge/checkpoint.hpp"
#include "hge/model.hpp"

namespace hge {

struct EpochMetrics {
  int epoch = 0;
  std::vector<double> l_context;
  std::vector<double> l_reg;
  double l_cls = 0.0;
  double total = 0.0;
  double seconds = 0.0;
};

struct TrainInit {
  ModelParams params;
  AdamState opt;
  int start_epoch = 0;
};

struct TrainResult {
  ModelParams params;       // final state (resumable)
  AdamState opt;            // final optimizer state
  ModelParams best_params;  // lowest probe-loss state (used for evaluation)
  int epochs_run = 0;
  int best_epoch = -1;
  std::vector<EpochMetrics> metrics;
  std::string metrics_jsonl;  // exact bytes of the per-epoch stream
};

enum class Ablation { minus_lambda, minus_q, minus_reg };

TrainConfig apply_ablation(TrainConfig cfg, Ablation which);

// Minibatch training of the joint objective. fold >= 0 attaches the
// multitask classification head using the split's train nodes for that fold
// (validation nodes drive early stopping); fold < 0 trains unsupervised.
// Deterministic given the config seed; one epoch record per line in JSONL.
TrainResult train(const TrainConfig& cfg, const Graph& g, const SplitAssignment* split = nullptr,
                  int fold = -1, std::optional<TrainInit> init = std::nullopt,
                  std::ostream* metrics_stream = nullptr);

// Prepared walk contexts, exposed for reuse across folds.
std::vector<ContextIndex> build_walk_contexts(const Graph& g, const TrainConfig& cfg);

TrainResult train_with_contexts(const TrainConfig& cfg, const Graph& g,
                                const std::vector<ContextIndex>& contexts,
                                const SplitAssignment* split, int fold,
                                std::optional<TrainInit> init, std::ostream* metrics_stream);

}  // namespace hge
