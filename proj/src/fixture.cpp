#include "hge/fixture.hpp"

#include "hge/rng.hpp"
#include "hge/trainer.hpp"

namespace hge {

Graph fixture_graph_20() {
  const int n = 20;
  Rng rng(seed_tag(7, "fixture"));
  std::vector<std::pair<int, int>> edges;
  // ring for connectivity plus random chords
  for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  for (int k = 0; k < 24; ++k) {
    int a = rng.below_int(n);
    int b = rng.below_int(n);
    if (a != b) edges.emplace_back(a, b);
  }
  std::vector<std::vector<double>> feats(n, std::vector<double>(8));
  for (auto& row : feats)
    for (double& x : row) x = rng.uniform(-1.0, 1.0);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % 2;
  return make_graph(n, std::move(edges), std::move(feats), std::move(labels));
}

TrainConfig fixture_gradcheck_config() {
  TrainConfig cfg;
  cfg.layer_count = 2;
  cfg.group_counts = {4, 2};
  cfg.hidden_dims = {8, 8};
  cfg.heads = 2;
  cfg.fanouts = {4, 4};
  cfg.walks_per_node = 5;
  cfg.walk_length = 5;
  cfg.batch_size = 20;
  cfg.context_pairs_per_target = 4;
  cfg.must_cap = 16;
  cfg.cannot_cap = 16;
  cfg.seed = 11;
  return cfg;
}

GradCheckReport run_fixture_gradcheck(const TrainConfig& cfg, double eps) {
  cfg.validate();
  Graph g = fixture_graph_20();
  const auto contexts = build_walk_contexts(g, cfg);

  ModelParams params = init_params(cfg, g.feature_dim(), g.node_count, g.class_count, cfg.seed);

  std::vector<int> targets(g.node_count);
  for (int i = 0; i < g.node_count; ++i) targets[i] = i;
  BatchPlan plan =
      plan_batch(g, contexts, targets, g.labels, cfg, seed_tag(cfg.seed, "fixture-plan"));

  auto reg = params.registry();
  std::vector<Tensor*> tensors;
  for (auto& np : reg) tensors.push_back(np.tensor);

  bool frozen = false;
  LossFn loss_fn = [&](std::vector<Tensor>* grads) {
    Tape tp;
    ModelVars vars = bind_vars(tp, params);
    ForwardResult fwd = forward_batch(tp, params, vars, plan, cfg.tau);
    if (!frozen) {
      // pin the link sets at the initial assignments so the loss stays smooth
      freeze_links(params, plan, tp, fwd);
      frozen = true;
    }
    TotalLoss loss = batch_loss(tp, params, vars, plan, fwd);
    if (grads) {
      tp.backward(loss.var);
      grads->clear();
      for (Var v : vars.flat) grads->push_back(tp.grad(v));
    }
    return loss.values.total;
  };
  return grad_check(loss_fn, tensors, eps);
}

}  // namespace hge
