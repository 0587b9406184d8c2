#include "hge/layer.hpp"

namespace hge {

Var attention_weights(Tape& tp, Var p_target, Var p_neighbors, Var a, double slope) {
  const Tensor& pn = tp.val(p_neighbors);
  if (pn.rank() != 2 || pn.rows() == 0)
    throw ContractError("attention_weights: neighbor list must be a non-empty matrix");
  const int d = pn.cols();
  if (tp.val(p_target).size() != d || tp.val(a).size() != 2 * d)
    throw DimensionError("attention_weights: target dim " + shape_str(tp.val(p_target).shape()) +
                         ", attention vector " + shape_str(tp.val(a).shape()));
  Var a_tgt = tp.slice_vec(a, 0, d);
  Var a_src = tp.slice_vec(a, d, d);
  Var t_half = tp.dot(a_tgt, p_target);
  Var s_half = tp.matmul(p_neighbors, a_src);
  Var logits = tp.leaky_relu(tp.add_broadcast(s_half, t_half), slope);
  return tp.softmax(logits);
}

namespace {

// Transformed source states for one head: H * W^T, with the sparse route for
// constant input features.
Var transform_states(Tape& tp, const SourceStates& h, Var w) {
  if (std::holds_alternative<Var>(h)) return tp.matmul_nt(std::get<Var>(h), w);
  return tp.feature_matmul(w, std::get<const SparseRows*>(h));
}

}  // namespace

Var aggregate(Tape& tp, const SourceStates& h_prev, Var z, Var phi, const LayerVars& params,
              const FanoutIndex& fanout, const AggregateOptions& opt, AttentionRecord* record) {
  if (params.weight.empty()) throw ContractError("aggregate: layer has no heads");
  if (fanout.fanout < 1 || fanout.target_count < 1)
    throw ContractError("aggregate: empty neighborhood sample");
  const int d_out = tp.val(params.weight[0]).rows();
  if (record) record->heads.clear();

  std::vector<Var> pooled;
  pooled.reserve(params.weight.size());
  for (std::size_t m = 0; m < params.weight.size(); ++m) {
    Var w = params.weight[m];
    Var p = transform_states(tp, h_prev, w);
    Var au = tp.matmul(p, tp.slice_vec(params.a_node[m], 0, d_out));
    Var av = tp.matmul(p, tp.slice_vec(params.a_node[m], d_out, d_out));
    Var lu, lv;
    if (!opt.uniform_lambda) {
      Var group_vecs = tp.matmul(z, tp.matmul_nt(phi, w));  // z^T Phi, transformed
      lu = tp.matmul(group_vecs, tp.slice_vec(params.a_grp[m], 0, d_out));
      lv = tp.matmul(group_vecs, tp.slice_vec(params.a_grp[m], d_out, d_out));
    }
    std::shared_ptr<AttentionStash> stash;
    pooled.push_back(tp.attentive_pool(p, au, av, lu, lv, &fanout, opt.slope, opt.uniform_lambda,
                                       record ? &stash : nullptr));
    if (record) record->heads.push_back(std::move(stash));
  }
  Var mixed = tp.average(pooled);
  return opt.nonlinearity ? tp.elu(mixed) : mixed;
}

Var aggregate_single(Tape& tp, Var h_target, Var h_neighbors, Var z_target, Var z_neighbors,
                     Var phi, const LayerVars& params, const AggregateOptions& opt) {
  if (params.weight.empty()) throw ContractError("aggregate_single: layer has no heads");
  const Tensor& hn = tp.val(h_neighbors);
  if (hn.rank() != 2 || hn.rows() == 0)
    throw ContractError("aggregate_single: empty neighborhood sample");
  const int s = hn.rows();

  std::vector<Var> pooled;
  for (std::size_t m = 0; m < params.weight.size(); ++m) {
    Var w = params.weight[m];
    Var p_t = tp.matmul(w, h_target);
    Var p_n = tp.matmul_nt(h_neighbors, w);
    Var alpha = attention_weights(tp, p_t, p_n, params.a_node[m], opt.slope);
    Var weights;
    if (opt.uniform_lambda) {
      weights = tp.affine(alpha, 1.0 / s, 0.0);
    } else {
      Var g_t = tp.matmul(w, tp.vecmat(z_target, phi));
      Var g_n = tp.matmul_nt(tp.matmul(z_neighbors, phi), w);
      Var lambda = attention_weights(tp, g_t, g_n, params.a_grp[m], opt.slope);
      weights = tp.mul(alpha, lambda);
    }
    pooled.push_back(tp.vecmat(weights, p_n));
  }
  Var mixed = tp.average(pooled);
  return opt.nonlinearity ? tp.elu(mixed) : mixed;
}

}  // namespace hge
