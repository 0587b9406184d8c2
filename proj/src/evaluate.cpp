#include "hge/evaluate.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "hge/membership.hpp"
#include "hge/rng.hpp"

namespace hge {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMat to_mat(const Tensor& t) {
  return Eigen::Map<const RowMat>(t.data(), t.rows(), t.cols());
}

Tensor from_mat(const RowMat& m) {
  Tensor t = Tensor::zeros({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  Eigen::Map<RowMat>(t.data(), m.rows(), m.cols()) = m;
  return t;
}

double lrelu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

void softmax_inplace(std::vector<double>& v) {
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double z = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    z += x;
  }
  for (double& x : v) x /= z;
}

}  // namespace

InferenceResult infer_full(const ModelParams& params, const Graph& g,
                           const AttentionObserver& observer) {
  const TrainConfig& cfg = params.cfg;
  if (g.features.empty()) throw ValidationError("infer_full: graph has no node features");
  if (g.feature_dim() != params.input_dim || g.node_count != params.node_count)
    throw IncompatibilityError("infer_full: graph does not match the checkpoint dimensions");
  const int v_count = g.node_count;
  const double tau = cfg.tau_at(std::max(0, cfg.epochs - 1));
  const double slope = 0.2;

  InferenceResult out;
  RowMat h(v_count, params.input_dim);
  for (int v = 0; v < v_count; ++v)
    for (int d = 0; d < params.input_dim; ++d) h(v, d) = g.features[v][d];

  for (int l = 0; l < cfg.layer_count; ++l) {
    const int k = cfg.group_counts[l];
    const int d_out = cfg.hidden_dims[l];
    const RowMat phi = to_mat(params.group_embeddings[l]);

    // memberships
    RowMat logits = h * phi.transpose();
    Tensor pi_t = Tensor::zeros({v_count, k});
    Tensor z_t = Tensor::zeros({v_count, k});
    std::vector<int> hard(v_count);
    std::vector<double> row(k);
    for (int v = 0; v < v_count; ++v) {
      for (int j = 0; j < k; ++j) row[j] = logits(v, j);
      softmax_inplace(row);
      for (int j = 0; j < k; ++j) pi_t.at(v, j) = row[j];
      hard[v] = hard_assignment(row);
      if (cfg.hard_group_lookup) {
        z_t.at(v, hard[v]) = 1.0;
      } else {
        // noise-free relaxed assignment: normalized pi^(1/tau)
        for (double& x : row) x = std::log(std::max(x, 1e-30)) / tau;
        softmax_inplace(row);
        for (int j = 0; j < k; ++j) z_t.at(v, j) = row[j];
      }
    }
    const RowMat z = to_mat(z_t);

    RowMat next = RowMat::Zero(v_count, d_out);
    for (int m = 0; m < cfg.heads; ++m) {
      const RowMat w = to_mat(params.layers[l].weight[m]);
      const RowMat p = h * w.transpose();
      const RowMat grp = z * (phi * w.transpose());
      const Tensor& an = params.layers[l].a_node[m];
      const Tensor& ag = params.layers[l].a_grp[m];
      Eigen::VectorXd au = p * Eigen::Map<const Eigen::VectorXd>(an.data(), d_out);
      Eigen::VectorXd av = p * Eigen::Map<const Eigen::VectorXd>(an.data() + d_out, d_out);
      Eigen::VectorXd lu = grp * Eigen::Map<const Eigen::VectorXd>(ag.data(), d_out);
      Eigen::VectorXd lv = grp * Eigen::Map<const Eigen::VectorXd>(ag.data() + d_out, d_out);

      std::vector<double> alpha, lambda;
      for (int v = 0; v < v_count; ++v) {
        std::vector<int> nbrs = g.adjacency[v];
        if (cfg.include_self || nbrs.empty()) nbrs.push_back(v);
        const int s = static_cast<int>(nbrs.size());
        alpha.assign(s, 0.0);
        lambda.assign(s, 0.0);
        for (int i = 0; i < s; ++i) alpha[i] = lrelu(au[v] + av[nbrs[i]], slope);
        softmax_inplace(alpha);
        if (cfg.disable_lambda) {
          std::fill(lambda.begin(), lambda.end(), 1.0 / s);
        } else {
          for (int i = 0; i < s; ++i) lambda[i] = lrelu(lu[v] + lv[nbrs[i]], slope);
          softmax_inplace(lambda);
        }
        for (int i = 0; i < s; ++i) {
          next.row(v) += alpha[i] * lambda[i] * p.row(nbrs[i]);
          if (observer) observer(l, v, nbrs[i], m, alpha[i], lambda[i]);
        }
      }
    }
    next /= static_cast<double>(cfg.heads);
    for (int v = 0; v < v_count; ++v)
      for (int d = 0; d < d_out; ++d)
        next(v, d) = next(v, d) > 0.0 ? next(v, d) : std::expm1(next(v, d));

    out.pi.push_back(std::move(pi_t));
    out.hard.push_back(std::move(hard));
    out.level_states.push_back(from_mat(next));
    h = std::move(next);
  }

  RowMat emb(v_count, params.composed_dim());
  int col = 0;
  for (int l = 0; l < cfg.layer_count; ++l) {
    emb.middleCols(col, cfg.hidden_dims[l]) = to_mat(out.level_states[l]);
    col += cfg.hidden_dims[l];
  }
  out.embeddings = from_mat(emb);
  return out;
}

std::vector<int> predict_classes(const ModelParams& params, const InferenceResult& inf) {
  if (params.class_count <= 0) throw ContractError("predict_classes: model has no head");
  const RowMat emb = to_mat(inf.embeddings);
  const RowMat w = to_mat(params.head_w);
  RowMat logits = emb * w.transpose();
  std::vector<int> pred(emb.rows());
  for (int v = 0; v < logits.rows(); ++v) {
    int best = 0;
    for (int c = 0; c < params.class_count; ++c) {
      const double val = logits(v, c) + params.head_b[c];
      if (val > logits(v, best) + params.head_b[best]) best = c;
    }
    pred[v] = best;
  }
  return pred;
}

std::vector<std::vector<double>> attention_divergence_full(const ModelParams& params,
                                                           const Graph& g) {
  // collect per (level, node): per-head rows, then head-average inside the KL
  struct NodeRows {
    std::vector<std::vector<double>> alpha, lambda;  // [heads][nbrs]
  };
  std::vector<std::vector<NodeRows>> acc(params.cfg.layer_count,
                                         std::vector<NodeRows>(g.node_count));
  for (auto& level : acc)
    for (auto& nr : level) {
      nr.alpha.assign(params.cfg.heads, {});
      nr.lambda.assign(params.cfg.heads, {});
    }
  infer_full(params, g,
             [&acc](int level, int target, int, int head, double alpha, double lambda) {
               acc[level][target].alpha[head].push_back(alpha);
               acc[level][target].lambda[head].push_back(lambda);
             });
  std::vector<std::vector<double>> out(params.cfg.layer_count,
                                       std::vector<double>(g.node_count, 0.0));
  for (int l = 0; l < params.cfg.layer_count; ++l)
    for (int v = 0; v < g.node_count; ++v)
      out[l][v] = attention_divergence(acc[l][v].alpha, acc[l][v].lambda);
  return out;
}

TrainInit warm_start(const ModelParams& pretrained, const TrainConfig& cfg, const Graph& g,
                     int class_count) {
  TrainInit init;
  init.params = init_params(cfg, g.feature_dim(), g.node_count, class_count, cfg.seed);
  ModelParams& fresh = init.params;
  ModelParams& src = const_cast<ModelParams&>(pretrained);
  auto src_reg = src.registry();
  for (NamedParam& dst : fresh.registry()) {
    for (NamedParam& s : src_reg)
      if (s.name == dst.name) {
        if (!s.tensor->same_shape(*dst.tensor))
          throw IncompatibilityError("warm_start: shape mismatch for " + dst.name);
        *dst.tensor = *s.tensor;
        break;
      }
  }
  std::vector<const Tensor*> ptrs;
  for (auto& np : fresh.registry()) ptrs.push_back(np.tensor);
  AdamConfig acfg;
  acfg.lr = cfg.learning_rate;
  init.opt = adam_init(ptrs, acfg);
  init.start_epoch = 0;
  return init;
}

NodeClassificationReport eval_node_classification(const TrainConfig& cfg, const Graph& g,
                                                  const SplitAssignment& split,
                                                  const ModelParams* warm, int jobs) {
  if (!g.has_labels()) throw ValidationError("node classification needs labels");
  const auto contexts = build_walk_contexts(g, cfg);
  const int folds = split.fold_count;

  NodeClassificationReport report;
  report.per_fold.resize(folds);
  report.best_epochs.assign(folds, -1);

  auto run_fold = [&](int fold) {
    std::optional<TrainInit> init;
    if (warm) init = warm_start(*warm, cfg, g, g.class_count);
    TrainResult res = train_with_contexts(cfg, g, contexts, &split, fold, std::move(init), nullptr);
    InferenceResult inf = infer_full(res.best_params, g);
    std::vector<int> pred_all = predict_classes(res.best_params, inf);
    std::vector<int> pred, gold;
    for (int v : split.test_nodes(fold)) {
      pred.push_back(pred_all[v]);
      gold.push_back(g.labels[v]);
    }
    report.per_fold[fold] = node_classification_metrics(pred, gold, g.class_count);
    report.best_epochs[fold] = res.best_epoch;
  };

  if (jobs <= 1) {
    for (int f = 0; f < folds; ++f) run_fold(f);
  } else {
    std::vector<std::thread> pool;
    for (int f = 0; f < folds; ++f) pool.emplace_back(run_fold, f);
    for (auto& t : pool) t.join();
  }

  auto agg = [&](auto pick) {
    double mean = 0.0;
    for (const auto& m : report.per_fold) mean += pick(m);
    mean /= folds;
    double var = 0.0;
    for (const auto& m : report.per_fold) var += (pick(m) - mean) * (pick(m) - mean);
    return std::make_pair(mean, std::sqrt(var / folds));
  };
  std::tie(report.mean.accuracy, report.stdev.accuracy) =
      agg([](const ClassificationMetrics& m) { return m.accuracy; });
  std::tie(report.mean.micro_f1, report.stdev.micro_f1) =
      agg([](const ClassificationMetrics& m) { return m.micro_f1; });
  std::tie(report.mean.macro_f1, report.stdev.macro_f1) =
      agg([](const ClassificationMetrics& m) { return m.macro_f1; });
  return report;
}

LinkPredictionReport eval_link_prediction(const TrainConfig& cfg, const Graph& g,
                                          double holdout_fraction, int negatives,
                                          const ModelParams* warm) {
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0)
    throw ConfigError("holdout fraction must be in (0,1)");
  if (negatives < 1) throw ConfigError("need at least one negative per candidate set");

  // seeded edge holdout
  std::vector<std::pair<int, int>> edges = g.edges;
  Rng rng(seed_tag(cfg.seed, "holdout"));
  rng.shuffle(edges);
  const int held = std::max(1, static_cast<int>(std::llround(edges.size() * holdout_fraction)));
  std::vector<std::pair<int, int>> heldout(edges.begin(), edges.begin() + held);
  std::vector<std::pair<int, int>> kept(edges.begin() + held, edges.end());

  Graph train_graph = make_graph(g.node_count, kept, g.features, g.labels);

  std::optional<TrainInit> init;
  if (warm) init = warm_start(*warm, cfg, train_graph, 0);
  TrainResult res = train(cfg, train_graph, nullptr, -1, std::move(init), nullptr);
  InferenceResult inf = infer_full(res.best_params, train_graph);
  const RowMat first = to_mat(inf.level_states[0]);

  Rng neg_rng(seed_tag(cfg.seed, "link-neg"));
  std::vector<CandidateSet> sets;
  sets.reserve(heldout.size());
  for (const auto& [a, b] : heldout) {
    CandidateSet cs;
    cs.positive_score = first.row(a).dot(first.row(b));
    cs.negative_scores.reserve(negatives);
    int guard = 0;
    while (static_cast<int>(cs.negative_scores.size()) < negatives) {
      int j = neg_rng.below_int(g.node_count);
      if (j == a || j == b || g.has_edge(a, j)) {
        if (++guard > 1000 * negatives)
          throw ContractError("link negatives exhausted for node " + g.original_ids[a]);
        continue;
      }
      cs.negative_scores.push_back(first.row(a).dot(first.row(j)));
    }
    sets.push_back(std::move(cs));
  }
  LinkPredictionReport report;
  report.metrics = link_prediction_metrics(sets);
  report.holdout_edges = held;
  report.negatives_per_candidate = negatives;
  return report;
}

namespace {

void write_double(std::ofstream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void export_embeddings_csv(const ModelParams& params, const Graph& g, const std::string& path) {
  InferenceResult inf = infer_full(params, g);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  out << "node_id";
  for (int d = 0; d < params.composed_dim(); ++d) out << ",e" << (d + 1);
  out << "\n";
  for (int v = 0; v < g.node_count; ++v) {
    out << g.original_ids[v];
    for (int d = 0; d < params.composed_dim(); ++d) {
      out << ",";
      write_double(out, inf.embeddings.at(v, d));
    }
    out << "\n";
  }
}

void export_memberships_csv(const ModelParams& params, const Graph& g, const std::string& path) {
  InferenceResult inf = infer_full(params, g);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  out << "node_id,layer,argmax_group,concentration,pi\n";
  for (int l = 0; l < params.cfg.layer_count; ++l) {
    const Tensor& pi = inf.pi[l];
    for (int v = 0; v < g.node_count; ++v) {
      const double* row = pi.data() + static_cast<std::int64_t>(v) * pi.cols();
      std::span<const double> pr(row, pi.cols());
      out << g.original_ids[v] << "," << (l + 1) << "," << hard_assignment(pr) << ",";
      write_double(out, concentration(pr));
      for (double x : pr) {
        out << ",";
        write_double(out, x);
      }
      out << "\n";
    }
  }
}

void export_attention_csv(const ModelParams& params, const Graph& g, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  out << "layer,target,neighbor,head,alpha,lambda\n";
  infer_full(params, g,
             [&](int level, int target, int neighbor, int head, double alpha, double lambda) {
               out << (level + 1) << "," << g.original_ids[target] << ","
                   << g.original_ids[neighbor] << "," << head << ",";
               write_double(out, alpha);
               out << ",";
               write_double(out, lambda);
               out << "\n";
             });
}

}  // namespace hge
