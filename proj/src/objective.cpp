#include "hge/objective.hpp"

#include "hge/rng.hpp"

namespace hge {

namespace {
constexpr double kLogitClamp = 30.0;
}

Var context_loss(Tape& tp, Var states, Var z, const ContextVars& q, const ContextBatch& batch,
                 bool membership_agnostic) {
  if (batch.size() == 0) throw ContractError("context_loss: empty context batch");
  if (batch.pos_ctx.size() != batch.neg_ctx.size() ||
      batch.pos_ctx.size() != batch.state_rows.size())
    throw ContractError("context_loss: ragged context batch");

  Var h = tp.gather_rows(states, batch.state_rows);
  Var pos_q = tp.gather_rows(q.q_node, batch.pos_ctx);
  Var neg_q = tp.gather_rows(q.q_node, batch.neg_ctx);
  if (!membership_agnostic) {
    Var group_mix = tp.matmul(tp.gather_rows(z, batch.assign_rows), q.q_grp);
    pos_q = tp.add(pos_q, group_mix);
    neg_q = tp.add(neg_q, group_mix);
  }
  Var pos_score = tp.clamp(tp.row_dot(h, pos_q), -kLogitClamp, kLogitClamp);
  Var neg_score = tp.clamp(tp.row_dot(h, neg_q), -kLogitClamp, kLogitClamp);
  // -log sigma(x) = softplus(-x); -log sigma(-x) = softplus(x)
  Var pos_term = tp.mean(tp.softplus(tp.affine(pos_score, -1.0, 0.0)));
  Var neg_term = tp.mean(tp.softplus(neg_score));
  return tp.add(pos_term, neg_term);
}

LinkSets build_links(const std::vector<int>& z_lower_hard, const std::vector<int>& z_upper_hard,
                     const std::vector<std::pair<int, int>>& candidate_pairs, int must_cap,
                     int cannot_cap, std::uint64_t seed) {
  if (z_lower_hard.size() != z_upper_hard.size())
    throw ContractError("build_links: assignment vectors differ in length");
  LinkSets links;
  for (const auto& [i, j] : candidate_pairs) {
    if (i < 0 || j < 0 || i >= static_cast<int>(z_lower_hard.size()) ||
        j >= static_cast<int>(z_lower_hard.size()))
      throw ReferenceError("build_links: candidate pair outside the batch");
    if (z_lower_hard[i] == z_lower_hard[j]) links.must.emplace_back(i, j);
    if (z_upper_hard[i] != z_upper_hard[j]) links.cannot.emplace_back(i, j);
  }
  Rng rng(seed_tag(seed, "links"));
  auto cap = [&rng](std::vector<std::pair<int, int>>& v, int limit) {
    if (limit >= 0 && static_cast<int>(v.size()) > limit) {
      rng.shuffle(v);
      v.resize(limit);
    }
  };
  cap(links.must, must_cap);
  cap(links.cannot, cannot_cap);
  return links;
}

namespace {

Var pair_dots(Tape& tp, Var z, const std::vector<std::pair<int, int>>& pairs) {
  std::vector<int> left, right;
  left.reserve(pairs.size());
  right.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    left.push_back(i);
    right.push_back(j);
  }
  return tp.row_dot(tp.gather_rows(z, left), tp.gather_rows(z, right));
}

}  // namespace

Var reg_loss(Tape& tp, const LinkSets& links, Var z_lower, Var z_upper, double gamma, double beta,
             RegNorm norm) {
  if (gamma < 0.0 || beta < 0.0) throw ContractError("reg_loss: penalties must be nonnegative");
  Var loss = tp.constant(Tensor::scalar(0.0));
  if (!links.must.empty() && gamma != 0.0) {
    Var dots = pair_dots(tp, z_upper, links.must);
    if (norm == RegNorm::mean) {
      loss = tp.add(loss, tp.affine(tp.mean(dots), -gamma, gamma));
    } else {
      loss = tp.add(loss, tp.affine(tp.sum(dots), -gamma,
                                    gamma * static_cast<double>(links.must.size())));
    }
  }
  if (!links.cannot.empty() && beta != 0.0) {
    Var dots = pair_dots(tp, z_lower, links.cannot);
    Var agg = norm == RegNorm::mean ? tp.mean(dots) : tp.sum(dots);
    loss = tp.add(loss, tp.affine(agg, beta, 0.0));
  }
  return loss;
}

Var classification_loss(Tape& tp, Var embeddings, Var head_w, Var head_b,
                        std::vector<int> labels) {
  if (tp.val(embeddings).rows() == 0) throw ContractError("classification_loss: empty batch");
  Var logits = tp.add_rowvec(tp.matmul_nt(embeddings, head_w), head_b);
  return tp.cross_entropy(tp.clamp(logits, -kLogitClamp, kLogitClamp), std::move(labels));
}

TotalLoss total_loss(Tape& tp, const std::vector<Var>& context_terms,
                     const std::vector<Var>& reg_terms, std::optional<Var> classification,
                     double classification_weight) {
  TotalLoss out;
  Var acc = tp.constant(Tensor::scalar(0.0));
  for (Var c : context_terms) {
    out.values.context.push_back(tp.val(c).item());
    acc = tp.add(acc, c);
  }
  for (Var r : reg_terms) {
    out.values.reg.push_back(tp.val(r).item());
    acc = tp.add(acc, r);
  }
  if (classification) {
    out.values.classification = tp.val(*classification).item();
    acc = tp.add(acc, tp.affine(*classification, classification_weight, 0.0));
  }
  out.var = acc;
  out.values.total = tp.val(acc).item();
  return out;
}

}  // namespace hge
