#include "hge/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace hge {

ClassificationMetrics node_classification_metrics(const std::vector<int>& pred,
                                                  const std::vector<int>& gold, int class_count) {
  if (pred.empty() || pred.size() != gold.size())
    throw ContractError("node_classification_metrics: empty or mismatched inputs");
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] < 0 || pred[i] >= class_count || gold[i] < 0 || gold[i] >= class_count)
      throw ValidationError("node_classification_metrics: class index out of range");

  std::vector<long> tp(class_count, 0), fp(class_count, 0), fn(class_count, 0);
  long correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == gold[i]) {
      ++correct;
      ++tp[gold[i]];
    } else {
      ++fp[pred[i]];
      ++fn[gold[i]];
    }
  }
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(correct) / pred.size();

  long tp_all = 0, fp_all = 0, fn_all = 0;
  double macro = 0.0;
  for (int c = 0; c < class_count; ++c) {
    tp_all += tp[c];
    fp_all += fp[c];
    fn_all += fn[c];
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    macro += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;  // absent class scores 0
  }
  m.macro_f1 = macro / class_count;
  const double micro_denom = 2.0 * tp_all + fp_all + fn_all;
  m.micro_f1 = micro_denom > 0.0 ? 2.0 * tp_all / micro_denom : 0.0;
  return m;
}

LinkMetrics link_prediction_metrics(const std::vector<CandidateSet>& sets) {
  if (sets.empty()) throw ContractError("link_prediction_metrics: no candidate sets");
  // pooled AUC over all (positive, negative) pairs
  double wins = 0.0;
  long pairs = 0;
  double mrr = 0.0;
  for (const CandidateSet& s : sets) {
    if (s.negative_scores.empty())
      throw ContractError("link_prediction_metrics: candidate set without negatives");
    long geq = 0;
    for (double n : s.negative_scores) {
      ++pairs;
      if (s.positive_score > n)
        wins += 1.0;
      else if (s.positive_score == n)
        wins += 0.5;
      if (n >= s.positive_score) ++geq;  // pessimistic tie handling
    }
    mrr += 1.0 / static_cast<double>(1 + geq);
  }
  // note: pooled AUC sums over per-set pairs; every set contributes its own
  // positive against its own negatives
  LinkMetrics m;
  m.auc = wins / static_cast<double>(pairs);
  m.mrr = mrr / static_cast<double>(sets.size());
  return m;
}

double kl_divergence(std::span<const double> alpha, std::span<const double> lambda) {
  if (alpha.size() != lambda.size()) throw ContractError("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i] <= 0.0) continue;
    kl += alpha[i] * std::log(alpha[i] / std::max(lambda[i], 1e-12));
  }
  return kl;
}

double attention_divergence(const std::vector<std::vector<double>>& alpha_rows,
                            const std::vector<std::vector<double>>& lambda_rows) {
  if (alpha_rows.empty() || alpha_rows.size() != lambda_rows.size())
    throw ContractError("attention_divergence: mismatched head rows");
  // average the heads, then one KL over the neighbor distribution
  const std::size_t n = alpha_rows[0].size();
  std::vector<double> alpha(n, 0.0), lambda(n, 0.0);
  for (std::size_t h = 0; h < alpha_rows.size(); ++h) {
    if (alpha_rows[h].size() != n || lambda_rows[h].size() != n)
      throw ContractError("attention_divergence: ragged rows");
    for (std::size_t i = 0; i < n; ++i) {
      alpha[i] += alpha_rows[h][i];
      lambda[i] += lambda_rows[h][i];
    }
  }
  const double inv = 1.0 / static_cast<double>(alpha_rows.size());
  for (std::size_t i = 0; i < n; ++i) {
    alpha[i] *= inv;
    lambda[i] *= inv;
  }
  return kl_divergence(alpha, lambda);
}

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() || a.size() != b.size()) throw ContractError("nmi: mismatched partitions");
  const int ka = *std::max_element(a.begin(), a.end()) + 1;
  const int kb = *std::max_element(b.begin(), b.end()) + 1;
  const double n = static_cast<double>(a.size());
  std::vector<double> ca(ka, 0.0), cb(kb, 0.0);
  std::vector<std::vector<double>> joint(ka, std::vector<double>(kb, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || b[i] < 0) throw ValidationError("nmi: negative cluster id");
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    joint[a[i]][b[i]] += 1.0;
  }
  double ha = 0.0, hb = 0.0, mi = 0.0;
  for (int i = 0; i < ka; ++i)
    if (ca[i] > 0.0) ha -= ca[i] / n * std::log(ca[i] / n);
  for (int j = 0; j < kb; ++j)
    if (cb[j] > 0.0) hb -= cb[j] / n * std::log(cb[j] / n);
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j)
      if (joint[i][j] > 0.0)
        mi += joint[i][j] / n * std::log(joint[i][j] * n / (ca[i] * cb[j]));
  if (ha == 0.0 && hb == 0.0) return 1.0;  // both single-cluster: identical
  const double denom = 0.5 * (ha + hb);
  return denom > 0.0 ? std::clamp(mi / denom, 0.0, 1.0) : 0.0;
}

}  // namespace hge
