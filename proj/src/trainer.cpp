#include "hge/trainer.hpp"

#include <chrono>
#include <sstream>

#include <json.hpp>

#include "hge/rng.hpp"

namespace hge {

using nlohmann::json;

TrainConfig apply_ablation(TrainConfig cfg, Ablation which) {
  switch (which) {
    case Ablation::minus_lambda:
      cfg.disable_lambda = true;
      break;
    case Ablation::minus_q:
      cfg.membership_agnostic_q = true;
      break;
    case Ablation::minus_reg:
      cfg.disable_reg = true;
      break;
  }
  return cfg;
}

std::vector<ContextIndex> build_walk_contexts(const Graph& g, const TrainConfig& cfg) {
  const auto walks = random_walks(g, cfg.walks_per_node, cfg.walk_length, cfg.seed);
  std::vector<ContextIndex> out;
  for (int l = 1; l <= cfg.effective_window(); ++l) {
    WalkContext ctx = context_pairs(walks, l, g);
    if (!ctx.positives.empty())
      sample_negatives(g, ctx, seed_mix(cfg.seed, l), cfg.negative_ratio);
    out.push_back(index_context(ctx, g.node_count));
  }
  return out;
}

namespace {

std::string metrics_line(const EpochMetrics& m, bool log_timing) {
  json j;
  j["epoch"] = m.epoch;
  j["l_context"] = m.l_context;
  j["l_reg"] = m.l_reg;
  j["l_cls"] = m.l_cls;
  j["total"] = m.total;
  j["seconds"] = log_timing ? m.seconds : 0.0;
  return j.dump();
}

ModelParams clone_params(ModelParams& p) {
  return p;  // Tensor has value semantics; registry() pointers re-derive
}

}  // namespace

TrainResult train_with_contexts(const TrainConfig& cfg, const Graph& g,
                                const std::vector<ContextIndex>& contexts,
                                const SplitAssignment* split, int fold,
                                std::optional<TrainInit> init, std::ostream* metrics_stream) {
  cfg.validate();
  if (g.features.empty()) throw ValidationError("train: graph has no node features");
  if (fold >= 0 && !split) throw ConfigError("train: classification fold given without a split");
  if (fold >= 0 && !g.has_labels()) throw ConfigError("train: graph has no labels");
  if (fold >= 0 && fold >= split->fold_count) throw ConfigError("train: fold out of range");

  const bool with_head = fold >= 0;
  std::vector<int> head_labels;  // per node; -1 masks non-train nodes
  if (with_head) {
    head_labels.assign(g.node_count, -1);
    for (int v : split->train_nodes(fold)) head_labels[v] = g.labels[v];
  }

  TrainResult res;
  if (init) {
    res.params = std::move(init->params);
    res.opt = std::move(init->opt);
    if (res.params.cfg.hash() != cfg.hash())
      throw IncompatibilityError("train: initial state was built for a different config");
  } else {
    res.params = init_params(cfg, g.feature_dim(), g.node_count,
                             with_head ? g.class_count : 0, cfg.seed);
    std::vector<const Tensor*> ptrs;
    for (auto& np : res.params.registry()) ptrs.push_back(np.tensor);
    AdamConfig acfg;
    acfg.lr = cfg.learning_rate;
    res.opt = adam_init(ptrs, acfg);
  }
  const int start_epoch = init ? init->start_epoch : 0;

  // weight decay follows the registry flags
  std::vector<double> decay;
  for (auto& np : res.params.registry()) decay.push_back(np.decay ? cfg.weight_decay : 0.0);

  // fixed probe batch for early stopping: validation nodes when a split is
  // present, otherwise a fixed node sample
  std::vector<int> probe_targets;
  std::vector<int> probe_labels;  // validation labels, probe-only (never stepped on)
  {
    std::vector<int> pool;
    if (split)
      pool = fold >= 0 ? split->val_nodes(fold) : split->test_nodes(0);
    else
      for (int v = 0; v < g.node_count; ++v) pool.push_back(v);
    Rng rng(seed_tag(cfg.seed, "probe"));
    rng.shuffle(pool);
    const int take = std::min<std::size_t>(pool.size(), 512);
    probe_targets.assign(pool.begin(), pool.begin() + take);
    if (with_head) {
      probe_labels.assign(g.node_count, -1);
      for (int v : probe_targets) probe_labels[v] = g.labels[v];
    }
  }

  double best_val = std::numeric_limits<double>::infinity();
  res.best_params = clone_params(res.params);
  int since_best = 0;
  res.best_epoch = start_epoch - 1;

  std::ostringstream jsonl;
  const std::uint64_t order_seed = seed_tag(cfg.seed, "order");
  const std::uint64_t plan_seed = seed_tag(cfg.seed, "plan");

  std::vector<int> all_nodes(g.node_count);
  for (int v = 0; v < g.node_count; ++v) all_nodes[v] = v;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double tau = cfg.tau_at(epoch);

    std::vector<int> order = all_nodes;
    Rng order_rng(seed_mix(order_seed, epoch));
    order_rng.shuffle(order);

    EpochMetrics em;
    em.epoch = epoch;
    int batches = 0;
    for (std::size_t off = 0; off < order.size(); off += cfg.batch_size, ++batches) {
      const std::size_t end = std::min(order.size(), off + cfg.batch_size);
      std::vector<int> targets(order.begin() + off, order.begin() + end);
      const std::uint64_t bseed = seed_mix(seed_mix(plan_seed, epoch), batches);
      try {
        BatchPlan plan = plan_batch(g, contexts, std::move(targets), head_labels, cfg, bseed);
        Tape tp;
        ModelVars vars = bind_vars(tp, res.params);
        ForwardResult fwd = forward_batch(tp, res.params, vars, plan, tau);
        TotalLoss loss = batch_loss(tp, res.params, vars, plan, fwd);
        tp.backward(loss.var);

        std::vector<Tensor*> ptrs;
        std::vector<const Tensor*> grads;
        auto reg = res.params.registry();
        for (std::size_t i = 0; i < reg.size(); ++i) {
          ptrs.push_back(reg[i].tensor);
          grads.push_back(&tp.grad(vars.flat[i]));
        }
        adam_step(ptrs, grads, res.opt, decay);

        if (em.l_context.empty()) em.l_context.assign(loss.values.context.size(), 0.0);
        if (em.l_reg.empty()) em.l_reg.assign(loss.values.reg.size(), 0.0);
        for (std::size_t i = 0; i < loss.values.context.size(); ++i)
          em.l_context[i] += loss.values.context[i];
        for (std::size_t i = 0; i < loss.values.reg.size(); ++i)
          em.l_reg[i] += loss.values.reg[i];
        em.l_cls += loss.values.classification;
        em.total += loss.values.total;
      } catch (const NumericError& e) {
        std::ostringstream diag;
        diag << "training aborted at epoch " << epoch << ", batch " << batches << ": " << e.what()
             << " [targets";
        for (std::size_t i = off; i < std::min(end, off + 8); ++i) diag << " " << order[i];
        diag << "]";
        throw NumericError(diag.str());
      }
    }
    const double inv = batches > 0 ? 1.0 / batches : 0.0;
    for (double& v : em.l_context) v *= inv;
    for (double& v : em.l_reg) v *= inv;
    em.l_cls *= inv;
    em.total *= inv;
    em.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string line = metrics_line(em, cfg.log_timing);
    jsonl << line << "\n";
    if (metrics_stream) (*metrics_stream) << line << "\n" << std::flush;
    res.metrics.push_back(em);
    res.epochs_run = epoch - start_epoch + 1;

    // early stop on the probe loss
    {
      BatchPlan plan = plan_batch(g, contexts, probe_targets,
                                  with_head ? probe_labels : head_labels, cfg,
                                  seed_tag(cfg.seed, "probe-plan"));
      Tape tp;
      ModelVars vars = bind_vars(tp, res.params);
      ForwardResult fwd = forward_batch(tp, res.params, vars, plan, tau);
      TotalLoss loss = batch_loss(tp, res.params, vars, plan, fwd);
      const double val = loss.values.total;
      if (val < best_val) {
        best_val = val;
        res.best_params = clone_params(res.params);
        res.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.early_stop_patience) {
        break;
      }
    }
  }

  res.metrics_jsonl = jsonl.str();
  return res;
}

TrainResult train(const TrainConfig& cfg, const Graph& g, const SplitAssignment* split, int fold,
                  std::optional<TrainInit> init, std::ostream* metrics_stream) {
  return train_with_contexts(cfg, g, build_walk_contexts(g, cfg), split, fold, std::move(init),
                             metrics_stream);
}

}  // namespace hge
