#pragma once

#include <span>
#include <vector>

#include "hge/common.hpp"

namespace hge {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

// Standard definitions; macro-F1 averages per-class F1 over all class_count
// classes, with classes absent from pred and gold contributing 0.
ClassificationMetrics node_classification_metrics(const std::vector<int>& pred,
                                                  const std::vector<int>& gold, int class_count);

// One retrieval instance: a positive's score against its sampled negatives.
struct CandidateSet {
  double positive_score = 0.0;
  std::vector<double> negative_scores;
};

struct LinkMetrics {
  double auc = 0.0;  // pooled positive/negative score pairs, ties count 0.5
  double mrr = 0.0;  // 1/rank, positive ranked after equal-scored negatives
};

LinkMetrics link_prediction_metrics(const std::vector<CandidateSet>& sets);

// KL(alpha || lambda) with 0*log(0/x) = 0 and lambda floored at 1e-12.
double kl_divergence(std::span<const double> alpha, std::span<const double> lambda);

// diff(i): KL between the head-averaged attention rows of one target.
double attention_divergence(const std::vector<std::vector<double>>& alpha_rows,
                            const std::vector<std::vector<double>>& lambda_rows);

// Normalized mutual information, arithmetic-mean normalization. Two
// zero-entropy partitions (both single-cluster) score 1.
double nmi(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace hge
