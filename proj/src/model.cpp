#include "hge/model.hpp"

#include <algorithm>
#include <unordered_map>

#include "hge/membership.hpp"
#include "hge/rng.hpp"

namespace hge {

int ModelParams::composed_dim() const {
  int d = 0;
  for (int h : cfg.hidden_dims) d += h;
  return d;
}

std::vector<NamedParam> ModelParams::registry() {
  std::vector<NamedParam> out;
  for (int l = 0; l < cfg.layer_count; ++l) {
    out.push_back({"l" + std::to_string(l) + ".phi", &group_embeddings[l], false});
    for (int m = 0; m < cfg.heads; ++m) {
      const std::string p = "l" + std::to_string(l) + ".h" + std::to_string(m);
      out.push_back({p + ".W", &layers[l].weight[m], true});
      out.push_back({p + ".a_node", &layers[l].a_node[m], true});
      out.push_back({p + ".a_grp", &layers[l].a_grp[m], true});
    }
  }
  for (int l = 0; l < cfg.layer_count; ++l) {
    out.push_back({"ctx" + std::to_string(l) + ".q_node", &contexts[l].q_node, false});
    out.push_back({"ctx" + std::to_string(l) + ".q_grp", &contexts[l].q_grp, false});
  }
  if (class_count > 0) {
    out.push_back({"head.W", &head_w, true});
    out.push_back({"head.b", &head_b, false});
  }
  return out;
}

namespace {

Tensor glorot(Rng& rng, std::vector<int> shape, int fan_in, int fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

ModelParams init_params(const TrainConfig& cfg, int input_dim, int node_count, int class_count,
                        std::uint64_t seed) {
  cfg.validate();
  if (input_dim < 1) throw ConfigError("init_params: input feature dimension must be positive");
  ModelParams p;
  p.cfg = cfg;
  p.input_dim = input_dim;
  p.node_count = node_count;
  p.class_count = class_count;

  const std::uint64_t base = seed_tag(seed, "init");
  int counter = 0;
  auto next_rng = [&] { return Rng(seed_mix(base, counter++)); };

  for (int l = 0; l < cfg.layer_count; ++l) {
    const int d_in = l == 0 ? input_dim : cfg.hidden_dims[l - 1];
    const int d_out = cfg.hidden_dims[l];
    const int k = cfg.group_counts[l];
    {
      Rng r = next_rng();
      p.group_embeddings.push_back(glorot(r, {k, d_in}, d_in, k));
    }
    LayerParams layer;
    layer.heads = cfg.heads;
    for (int m = 0; m < cfg.heads; ++m) {
      Rng rw = next_rng();
      layer.weight.push_back(glorot(rw, {d_out, d_in}, d_in, d_out));
      Rng ra = next_rng();
      layer.a_node.push_back(glorot(ra, {2 * d_out}, 2 * d_out, 1));
      Rng rg = next_rng();
      layer.a_grp.push_back(glorot(rg, {2 * d_out}, 2 * d_out, 1));
    }
    p.layers.push_back(std::move(layer));
  }
  for (int l = 0; l < cfg.layer_count; ++l) {
    const int d_out = cfg.hidden_dims[l];
    ContextTable ctx;
    {
      Rng r = next_rng();
      ctx.q_node = glorot(r, {node_count, d_out}, node_count, d_out);
    }
    {
      Rng r = next_rng();
      ctx.q_grp = glorot(r, {cfg.group_counts[l], d_out}, cfg.group_counts[l], d_out);
    }
    p.contexts.push_back(std::move(ctx));
  }
  if (class_count > 0) {
    Rng r = next_rng();
    p.head_w = glorot(r, {class_count, p.composed_dim()}, p.composed_dim(), class_count);
    p.head_b = Tensor::zeros({class_count});
  }
  return p;
}

ModelVars bind_vars(Tape& tp, ModelParams& params) {
  ModelVars v;
  v.phi.resize(params.cfg.layer_count);
  v.layers.resize(params.cfg.layer_count);
  v.contexts.resize(params.cfg.layer_count);
  for (NamedParam& np : params.registry()) {
    Var var = tp.leaf(np.tensor);
    v.flat.push_back(var);
    // route the handle to its slot by name
    if (np.name == "head.W") {
      v.head_w = var;
      continue;
    }
    if (np.name == "head.b") {
      v.head_b = var;
      continue;
    }
    if (np.name.rfind("ctx", 0) == 0) {
      int l = std::stoi(np.name.substr(3));
      if (np.name.find("q_node") != std::string::npos)
        v.contexts[l].q_node = var;
      else
        v.contexts[l].q_grp = var;
      continue;
    }
    int l = std::stoi(np.name.substr(1));
    if (np.name.find(".phi") != std::string::npos) {
      v.phi[l] = var;
    } else if (np.name.find(".W") != std::string::npos) {
      v.layers[l].weight.push_back(var);
    } else if (np.name.find(".a_node") != std::string::npos) {
      v.layers[l].a_node.push_back(var);
    } else {
      v.layers[l].a_grp.push_back(var);
    }
  }
  return v;
}

ContextIndex index_context(const WalkContext& ctx, int node_count) {
  ContextIndex idx;
  idx.contexts_of.assign(node_count, {});
  for (const auto& [t, c] : ctx.positives) idx.contexts_of[t].push_back(c);
  idx.negatives_of = ctx.negatives_of;
  if (idx.negatives_of.empty()) idx.negatives_of.assign(node_count, {});
  return idx;
}

BatchPlan plan_batch(const Graph& g, const std::vector<ContextIndex>& contexts,
                     std::vector<int> targets, const std::vector<int>& labels_of_graph,
                     const TrainConfig& cfg, std::uint64_t seed) {
  if (targets.empty()) throw ContractError("plan_batch: empty target batch");
  const int levels = cfg.layer_count;
  if (!contexts.empty() && static_cast<int>(contexts.size()) != levels)
    throw ContractError("plan_batch: context index count does not match layers");

  BatchPlan plan;
  plan.targets = std::move(targets);
  plan.link_seed = seed_mix(seed_tag(seed, "links"), 1);
  plan.noise_seed = seed_mix(seed_tag(seed, "noise"), 1);
  plan.labels.assign(plan.targets.size(), -1);
  if (!labels_of_graph.empty())
    for (std::size_t i = 0; i < plan.targets.size(); ++i)
      plan.labels[i] = labels_of_graph[plan.targets[i]];

  plan.levels.resize(levels);
  // top-down: materialize each level's source set with the upper set as prefix
  std::vector<int> upper = plan.targets;
  for (int l = levels - 1; l >= 0; --l) {
    LevelPlan& lp = plan.levels[l];
    const int fan = cfg.fanouts[l] + (cfg.include_self ? 1 : 0);
    lp.nodes = upper;
    std::unordered_map<int, int> pos;
    pos.reserve(upper.size() * 4);
    for (std::size_t i = 0; i < upper.size(); ++i) pos.emplace(upper[i], static_cast<int>(i));
    lp.fanout.target_count = static_cast<int>(upper.size());
    lp.fanout.fanout = fan;
    lp.fanout.neighbor_pos.reserve(upper.size() * fan);
    lp.fanout.target_pos.resize(upper.size());
    const std::uint64_t level_seed = seed_mix(seed_tag(seed, "fan"), l);
    for (std::size_t t = 0; t < upper.size(); ++t) {
      lp.fanout.target_pos[t] = static_cast<int>(t);
      std::vector<int> nbrs = sample_neighbors(g, upper[t], cfg.fanouts[l], level_seed);
      if (cfg.include_self) nbrs.push_back(upper[t]);
      for (int nb : nbrs) {
        auto [it, inserted] = pos.emplace(nb, static_cast<int>(lp.nodes.size()));
        if (inserted) lp.nodes.push_back(nb);
        lp.fanout.neighbor_pos.push_back(it->second);
      }
    }
    lp.gumbel = gumbel_noise(static_cast<int>(lp.nodes.size()), cfg.group_counts[l],
                             seed_mix(seed_tag(seed, "gum"), l));
    upper = lp.nodes;
  }

  // per-level skip-gram term selection; targets sit at rows 0..B-1 everywhere
  if (!contexts.empty()) {
    for (int l = 0; l < levels; ++l) {
      Rng rng(seed_mix(seed_tag(seed, "ctxsel"), l));
      ContextBatch& cb = plan.levels[l].ctx;
      for (std::size_t i = 0; i < plan.targets.size(); ++i) {
        const int t = plan.targets[i];
        const auto& pool = contexts[l].contexts_of[t];
        const auto& negs = contexts[l].negatives_of[t];
        if (pool.empty() || negs.empty()) continue;
        const int take = std::min<int>(cfg.context_pairs_per_target, static_cast<int>(pool.size()));
        for (int k = 0; k < take; ++k) {
          const int pidx = static_cast<int>(pool.size()) <= take
                               ? k
                               : rng.below_int(static_cast<int>(pool.size()));
          cb.state_rows.push_back(static_cast<int>(i));
          cb.assign_rows.push_back(static_cast<int>(i));
          cb.pos_ctx.push_back(pool[pidx]);
          cb.neg_ctx.push_back(negs[rng.below_int(static_cast<int>(negs.size()))]);
        }
      }
    }
  }

  // candidate pairs for the inter-layer constraints, drawn within the batch
  plan.link_candidates.resize(std::max(0, levels - 1));
  for (int b = 0; b + 1 < levels; ++b) {
    const int n = plan.levels[b + 1].fanout.target_count;  // |upper set| of boundary b
    if (n < 2) continue;
    Rng rng(seed_mix(seed_tag(seed, "cand"), b));
    const int want = 2 * (cfg.must_cap + cfg.cannot_cap);
    auto& cand = plan.link_candidates[b];
    cand.reserve(want);
    for (int k = 0; k < want; ++k) {
      int i = rng.below_int(n);
      int j = rng.below_int(n - 1);
      if (j >= i) ++j;
      cand.emplace_back(std::min(i, j), std::max(i, j));
    }
  }

  // feature rows of the base set
  if (g.features.empty()) throw ValidationError("plan_batch: graph has no node features");
  std::vector<std::vector<double>> rows;
  rows.reserve(plan.levels[0].nodes.size());
  for (int v : plan.levels[0].nodes) rows.push_back(g.features[v]);
  plan.base_features = SparseRows::from_dense_rows(rows, g.feature_dim());
  return plan;
}

namespace {

// Upper set of level l is the row prefix of the level's source set.
int upper_count(const BatchPlan& plan, int level) {
  return plan.levels[level].fanout.target_count;
}

Tensor hard_one_hot(const Tensor& pi) {
  Tensor z = Tensor::zeros(pi.shape());
  for (int r = 0; r < pi.rows(); ++r) {
    const double* row = pi.data() + static_cast<std::int64_t>(r) * pi.cols();
    z.at(r, hard_assignment(std::span<const double>(row, pi.cols()))) = 1.0;
  }
  return z;
}

}  // namespace

ForwardResult forward_batch(Tape& tp, const ModelParams& params, const ModelVars& vars,
                            const BatchPlan& plan, double tau, bool record_attention) {
  const TrainConfig& cfg = params.cfg;
  ForwardResult out;
  out.attention.resize(cfg.layer_count);

  SourceStates source = &plan.base_features;
  for (int l = 0; l < cfg.layer_count; ++l) {
    const LevelPlan& lp = plan.levels[l];
    Var pi = std::holds_alternative<Var>(source)
                 ? membership_distribution(tp, vars.phi[l], std::get<Var>(source))
                 : membership_distribution(tp, vars.phi[l],
                                           std::get<const SparseRows*>(source));
    if (cfg.dirichlet_sample)
      pi = tp.constant(dirichlet_rows(tp.val(pi), seed_mix(plan.noise_seed, l)));
    Var z = cfg.hard_group_lookup ? tp.constant(hard_one_hot(tp.val(pi)))
                                  : gumbel_softmax(tp, pi, lp.gumbel, tau);
    AggregateOptions opt;
    opt.uniform_lambda = cfg.disable_lambda;
    Var state = aggregate(tp, source, z, vars.phi[l], vars.layers[l], lp.fanout, opt,
                          record_attention ? &out.attention[l] : nullptr);
    out.pi.push_back(pi);
    out.z.push_back(z);
    out.states.push_back(state);
    source = state;
  }

  std::vector<int> prefix(plan.targets.size());
  for (std::size_t i = 0; i < prefix.size(); ++i) prefix[i] = static_cast<int>(i);
  Var emb = tp.gather_rows(out.states[0], prefix);
  for (int l = 1; l < cfg.layer_count; ++l)
    emb = tp.concat_cols(emb, tp.gather_rows(out.states[l], prefix));
  out.target_embedding = emb;
  return out;
}

namespace {

std::vector<int> hard_rows(const Tensor& z, int count) {
  std::vector<int> out(count);
  for (int r = 0; r < count; ++r) {
    const double* row = z.data() + static_cast<std::int64_t>(r) * z.cols();
    out[r] = hard_assignment(std::span<const double>(row, z.cols()));
  }
  return out;
}

}  // namespace

void freeze_links(const ModelParams& params, BatchPlan& plan, Tape& tp, const ForwardResult& fwd) {
  const TrainConfig& cfg = params.cfg;
  std::vector<LinkSets> frozen;
  for (int b = 0; b + 1 < cfg.layer_count; ++b) {
    const int n_upper = upper_count(plan, b + 1);
    LinkSets links = build_links(hard_rows(tp.val(fwd.z[b]), n_upper),
                                 hard_rows(tp.val(fwd.z[b + 1]), n_upper),
                                 plan.link_candidates[b], cfg.must_cap, cfg.cannot_cap,
                                 seed_mix(plan.link_seed, b));
    frozen.push_back(std::move(links));
  }
  plan.frozen_links = std::move(frozen);
}

TotalLoss batch_loss(Tape& tp, const ModelParams& params, const ModelVars& vars,
                     const BatchPlan& plan, const ForwardResult& fwd,
                     double classification_weight) {
  const TrainConfig& cfg = params.cfg;
  std::vector<Var> context_terms;
  for (int l = 0; l < cfg.layer_count; ++l) {
    const ContextBatch& cb = plan.levels[l].ctx;
    if (cb.size() == 0) {
      context_terms.push_back(tp.constant(Tensor::scalar(0.0)));
      continue;
    }
    context_terms.push_back(context_loss(tp, fwd.states[l], fwd.z[l], vars.contexts[l], cb,
                                         cfg.membership_agnostic_q));
  }

  std::vector<Var> reg_terms;
  if (!cfg.disable_reg) {
    for (int b = 0; b + 1 < cfg.layer_count; ++b) {
      const int n_upper = upper_count(plan, b + 1);
      LinkSets links;
      if (plan.frozen_links) {
        links = (*plan.frozen_links)[b];
      } else {
        links = build_links(hard_rows(tp.val(fwd.z[b]), n_upper),
                            hard_rows(tp.val(fwd.z[b + 1]), n_upper), plan.link_candidates[b],
                            cfg.must_cap, cfg.cannot_cap, seed_mix(plan.link_seed, b));
      }
      // rows of the upper set index both assignment matrices (prefix layout)
      std::vector<int> prefix(n_upper);
      for (int i = 0; i < n_upper; ++i) prefix[i] = i;
      Var z_lower = tp.gather_rows(fwd.z[b], prefix);
      reg_terms.push_back(
          reg_loss(tp, links, z_lower, fwd.z[b + 1], cfg.gamma, cfg.beta, RegNorm::mean));
    }
  }

  std::optional<Var> cls;
  double weight = classification_weight < 0.0 ? cfg.classification_weight : classification_weight;
  bool any_label = false;
  for (int lab : plan.labels) any_label = any_label || lab >= 0;
  if (params.class_count > 0 && any_label && weight > 0.0)
    cls = classification_loss(tp, fwd.target_embedding, vars.head_w, vars.head_b, plan.labels);

  return total_loss(tp, context_terms, reg_terms, cls, weight);
}

}  // namespace hge
