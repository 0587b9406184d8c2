#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hge/gradcheck.hpp"
#include "hge/layer.hpp"
#include "hge/membership.hpp"
#include "hge/rng.hpp"

using namespace hge;

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

struct SmallLayer {
  LayerParams params;
  Tensor phi;
  SmallLayer(Rng& rng, int heads, int d_in, int d_out, int k) {
    params.heads = heads;
    for (int m = 0; m < heads; ++m) {
      params.weight.push_back(random_tensor(rng, {d_out, d_in}));
      params.a_node.push_back(random_tensor(rng, {2 * d_out}));
      params.a_grp.push_back(random_tensor(rng, {2 * d_out}));
    }
    phi = random_tensor(rng, {k, d_in});
  }
  LayerVars bind(Tape& tp) {
    LayerVars v;
    for (int m = 0; m < params.heads; ++m) {
      v.weight.push_back(tp.leaf(&params.weight[m]));
      v.a_node.push_back(tp.leaf(&params.a_node[m]));
      v.a_grp.push_back(tp.leaf(&params.a_grp[m]));
    }
    return v;
  }
};

Tensor simplex_rows(Rng& rng, int n, int k) {
  Tensor z = Tensor::zeros({n, k});
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += z.at(r, j) = rng.uniform(0.01, 1.0);
    for (int j = 0; j < k; ++j) z.at(r, j) /= s;
  }
  return z;
}

}  // namespace

TEST_CASE("attention_weights") {
  SUBCASE("zero vector gives uniform weights") {
    Tape tp;
    Var a = tp.constant(Tensor::zeros({4}));
    Var pt = tp.constant(Tensor::row({1.0, -1.0}));
    Var pn = tp.constant(Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}));
    const Tensor& w = tp.val(attention_weights(tp, pt, pn, a));
    for (int i = 0; i < 3; ++i) CHECK(w[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
  SUBCASE("identical neighbors give uniform weights") {
    Rng rng(1);
    Tape tp;
    Var a = tp.constant(random_tensor(rng, {4}));
    Var pt = tp.constant(random_tensor(rng, {2}));
    Var pn = tp.constant(Tensor::from({4, 2}, {0.3, 0.7, 0.3, 0.7, 0.3, 0.7, 0.3, 0.7}));
    const Tensor& w = tp.val(attention_weights(tp, pt, pn, a));
    for (int i = 0; i < 4; ++i) CHECK(w[i] == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("constructed logits 0, ln2, ln4 give 1/7, 2/7, 4/7") {
    // a = [0 | 1]: logit_j = LeakyReLU(p_j[0]); all nonnegative
    Tape tp;
    Var a = tp.constant(Tensor::row({0.0, 1.0}));
    Var pt = tp.constant(Tensor::row({5.0}));
    Var pn = tp.constant(Tensor::from({3, 1}, {0.0, std::log(2.0), std::log(4.0)}));
    const Tensor& w = tp.val(attention_weights(tp, pt, pn, a));
    CHECK(w[0] == doctest::Approx(1.0 / 7).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(2.0 / 7).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(4.0 / 7).epsilon(1e-12));
  }
  SUBCASE("empty neighbor list rejected") {
    Tape tp;
    Var a = tp.constant(Tensor::zeros({4}));
    Var pt = tp.constant(Tensor::row({1.0, 2.0}));
    Var pn = tp.constant(Tensor::zeros({0, 2}));
    CHECK_THROWS_AS(attention_weights(tp, pt, pn, a), ContractError);
  }
}

TEST_CASE("aggregate_single fixtures") {
  SUBCASE("uniform attention, identity transform: (1/|N|) * mean of neighbors") {
    Tape tp;
    LayerParams lp;
    lp.heads = 1;
    lp.weight.push_back(Tensor::from({2, 2}, {1, 0, 0, 1}));
    lp.a_node.push_back(Tensor::zeros({4}));  // uniform alpha
    lp.a_grp.push_back(Tensor::zeros({4}));   // uniform lambda
    LayerVars lv;
    lv.weight.push_back(tp.constant(lp.weight[0]));
    lv.a_node.push_back(tp.constant(lp.a_node[0]));
    lv.a_grp.push_back(tp.constant(lp.a_grp[0]));

    Tensor neighbors = Tensor::from({3, 2}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
    Tensor phi = Tensor::from({2, 2}, {0.5, -0.5, 0.2, 0.9});
    AggregateOptions opt;
    opt.nonlinearity = false;  // identity test hook
    Rng zrng(2);
    Var out = aggregate_single(tp, tp.constant(Tensor::row({0.0, 0.0})),
                               tp.constant(neighbors), tp.constant(Tensor::row({0.5, 0.5})),
                               tp.constant(simplex_rows(zrng, 3, 2)),
                               tp.constant(phi), lv, opt);
    // hand computation: sum_j (1/3)(1/3) h_j = mean / 3
    for (int d = 0; d < 2; ++d) {
      double mean = (neighbors.at(0, d) + neighbors.at(1, d) + neighbors.at(2, d)) / 3.0;
      CHECK(tp.val(out)[d] == doctest::Approx(mean / 3.0).epsilon(1e-12));
    }
  }
  SUBCASE("single neighbor forces alpha = lambda = 1") {
    Rng rng(7);
    SmallLayer sl(rng, 1, 3, 2, 2);
    Tape tp;
    LayerVars lv = sl.bind(tp);
    Tensor h_n = random_tensor(rng, {1, 3});
    Var out = aggregate_single(tp, tp.constant(random_tensor(rng, {3})), tp.constant(h_n),
                               tp.constant(Tensor::row({0.3, 0.7})),
                               tp.constant(simplex_rows(rng, 1, 2)), tp.constant(sl.phi), lv,
                               AggregateOptions{});
    // expected: elu(W h_j)
    Tape tp2;
    Var expect = tp2.elu(tp2.matmul(tp2.constant(sl.params.weight[0]),
                                    tp2.constant(Tensor::from({3}, h_n.values()))));
    for (int d = 0; d < 2; ++d)
      CHECK(tp.val(out)[d] == doctest::Approx(tp2.val(expect)[d]).epsilon(1e-12));
  }
  SUBCASE("two identical heads equal one head") {
    Rng rng(17);
    SmallLayer one(rng, 1, 3, 2, 2);
    SmallLayer two(rng, 2, 3, 2, 2);
    two.params.weight[0] = two.params.weight[1] = one.params.weight[0];
    two.params.a_node[0] = two.params.a_node[1] = one.params.a_node[0];
    two.params.a_grp[0] = two.params.a_grp[1] = one.params.a_grp[0];
    two.phi = one.phi;
    Tensor ht = random_tensor(rng, {3});
    Tensor hn = random_tensor(rng, {4, 3});
    Tensor zt = Tensor::row({0.6, 0.4});
    Tensor zn = simplex_rows(rng, 4, 2);
    Tape tp;
    LayerVars lv1 = one.bind(tp);
    LayerVars lv2 = two.bind(tp);
    Var o1 = aggregate_single(tp, tp.constant(ht), tp.constant(hn), tp.constant(zt),
                              tp.constant(zn), tp.constant(one.phi), lv1, AggregateOptions{});
    Var o2 = aggregate_single(tp, tp.constant(ht), tp.constant(hn), tp.constant(zt),
                              tp.constant(zn), tp.constant(two.phi), lv2, AggregateOptions{});
    for (int d = 0; d < 2; ++d)
      CHECK(tp.val(o1)[d] == doctest::Approx(tp.val(o2)[d]).epsilon(1e-12));
  }
}

namespace {

// shared random instance for the batched layer
struct BatchInstance {
  SmallLayer layer;
  Tensor h_src;   // [6 x 3]
  Tensor z;       // [6 x 2]
  FanoutIndex idx;
  BatchInstance(Rng& rng, int heads = 2)
      : layer(rng, heads, 3, 2, 2),
        h_src(random_tensor(rng, {6, 3})),
        z(simplex_rows(rng, 6, 2)) {
    idx.target_count = 3;
    idx.fanout = 4;
    idx.target_pos = {0, 1, 2};
    idx.neighbor_pos = {1, 2, 3, 0, 2, 3, 4, 1, 5, 0, 1, 2};
  }
};

}  // namespace

TEST_CASE("batched aggregate matches the single-target route") {
  Rng rng(23);
  BatchInstance bi(rng);
  Tape tp;
  LayerVars lv = bi.layer.bind(tp);
  Var phi = tp.leaf(&bi.layer.phi);
  Var h = tp.constant(bi.h_src);
  Var z = tp.constant(bi.z);
  AttentionRecord rec;
  Var batched = aggregate(tp, h, z, phi, lv, bi.idx, AggregateOptions{}, &rec);

  for (int t = 0; t < 3; ++t) {
    std::vector<int> nbrs(bi.idx.neighbor_pos.begin() + t * 4,
                          bi.idx.neighbor_pos.begin() + (t + 1) * 4);
    Tensor hn = Tensor::zeros({4, 3});
    Tensor zn = Tensor::zeros({4, 2});
    for (int s = 0; s < 4; ++s)
      for (int d = 0; d < 3; ++d) hn.at(s, d) = bi.h_src.at(nbrs[s], d);
    for (int s = 0; s < 4; ++s)
      for (int d = 0; d < 2; ++d) zn.at(s, d) = bi.z.at(nbrs[s], d);
    Tensor ht = Tensor::zeros({3});
    for (int d = 0; d < 3; ++d) ht[d] = bi.h_src.at(t, d);
    Tensor zt = Tensor::zeros({2});
    for (int d = 0; d < 2; ++d) zt[d] = bi.z.at(t, d);
    Var single = aggregate_single(tp, tp.constant(ht), tp.constant(hn), tp.constant(zt),
                                  tp.constant(zn), tp.constant(bi.layer.phi),
                                  bi.layer.bind(tp), AggregateOptions{});
    for (int d = 0; d < 2; ++d)
      CHECK(tp.val(batched).at(t, d) == doctest::Approx(tp.val(single)[d]).epsilon(1e-10));
  }
}

TEST_CASE("attention rows normalize and neighbors permute freely") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    BatchInstance bi(rng);
    Tape tp;
    LayerVars lv = bi.layer.bind(tp);
    Var phi = tp.leaf(&bi.layer.phi);
    AttentionRecord rec;
    Var out = aggregate(tp, tp.constant(bi.h_src), tp.constant(bi.z), phi, lv, bi.idx,
                        AggregateOptions{}, &rec);
    for (const auto& stash : rec.heads)
      for (int t = 0; t < 3; ++t) {
        double sa = 0.0, sl = 0.0;
        for (int s = 0; s < 4; ++s) {
          CHECK(stash->alpha.at(t, s) >= 0.0);
          CHECK(stash->lambda.at(t, s) >= 0.0);
          sa += stash->alpha.at(t, s);
          sl += stash->lambda.at(t, s);
        }
        CHECK(sa == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(sl == doctest::Approx(1.0).epsilon(1e-6));
      }

    // permute each target's neighbor slots
    FanoutIndex shuffled = bi.idx;
    for (int t = 0; t < 3; ++t) {
      std::vector<int> slot(shuffled.neighbor_pos.begin() + t * 4,
                            shuffled.neighbor_pos.begin() + (t + 1) * 4);
      rng.shuffle(slot);
      std::copy(slot.begin(), slot.end(), shuffled.neighbor_pos.begin() + t * 4);
    }
    Var out2 = aggregate(tp, tp.constant(bi.h_src), tp.constant(bi.z), phi, lv, shuffled,
                         AggregateOptions{});
    for (std::int64_t i = 0; i < tp.val(out).size(); ++i)
      CHECK(tp.val(out)[i] == doctest::Approx(tp.val(out2)[i]).epsilon(1e-9));
  }
}

TEST_CASE("single shared group makes lambda uniform") {
  Rng rng(37);
  SmallLayer sl(rng, 2, 3, 2, 1);  // K = 1
  Tensor h_src = random_tensor(rng, {6, 3});
  Tensor z = Tensor::full({6, 1}, 1.0);
  FanoutIndex idx;
  idx.target_count = 3;
  idx.fanout = 4;
  idx.target_pos = {0, 1, 2};
  idx.neighbor_pos = {1, 2, 3, 0, 2, 3, 4, 1, 5, 0, 1, 2};

  Tape tp;
  LayerVars lv = sl.bind(tp);
  Var phi = tp.leaf(&sl.phi);
  AggregateOptions with_lambda;
  AggregateOptions no_lambda;
  no_lambda.uniform_lambda = true;
  Var a = aggregate(tp, tp.constant(h_src), tp.constant(z), phi, lv, idx, with_lambda);
  Var b = aggregate(tp, tp.constant(h_src), tp.constant(z), phi, lv, idx, no_lambda);
  for (std::int64_t i = 0; i < tp.val(a).size(); ++i)
    CHECK(tp.val(a)[i] == doctest::Approx(tp.val(b)[i]).epsilon(1e-12));
}

TEST_CASE("sparse and dense source states agree") {
  Rng rng(41);
  BatchInstance bi(rng);
  std::vector<std::vector<double>> rows(6, std::vector<double>(3));
  for (int r = 0; r < 6; ++r)
    for (int d = 0; d < 3; ++d) rows[r][d] = bi.h_src.at(r, d);
  SparseRows sp = SparseRows::from_dense_rows(rows, 3);

  Tape tp;
  LayerVars lv = bi.layer.bind(tp);
  Var phi = tp.leaf(&bi.layer.phi);
  Var dense = aggregate(tp, tp.constant(bi.h_src), tp.constant(bi.z), phi, lv, bi.idx,
                        AggregateOptions{});
  Var sparse = aggregate(tp, &sp, tp.constant(bi.z), phi, lv, bi.idx, AggregateOptions{});
  for (std::int64_t i = 0; i < tp.val(dense).size(); ++i)
    CHECK(tp.val(dense)[i] == doctest::Approx(tp.val(sparse)[i]).epsilon(1e-12));
}

TEST_CASE("aggregate gradients pass central differences") {
  Rng rng(47);
  BatchInstance bi(rng, 1);
  Tensor z_src = bi.z;

  std::vector<Tensor*> params{&bi.layer.params.weight[0], &bi.layer.params.a_node[0],
                              &bi.layer.params.a_grp[0], &bi.layer.phi, &z_src};
  Tensor weights;
  LossFn f = [&](std::vector<Tensor>* grads) {
    Tape tp;
    LayerVars lv = bi.layer.bind(tp);
    Var phi = tp.leaf(&bi.layer.phi);
    Var z = tp.leaf(&z_src);
    Var out = aggregate(tp, tp.constant(bi.h_src), z, phi, lv, bi.idx, AggregateOptions{});
    if (weights.empty()) {
      weights = Tensor::zeros(tp.val(out).shape());
      for (std::int64_t i = 0; i < weights.size(); ++i) weights[i] = rng.uniform(-1.0, 1.0);
    }
    Var loss = tp.sum(tp.mul(out, tp.constant(weights)));
    tp.backward(loss);
    if (grads) {
      *grads = {tp.grad(lv.weight[0]), tp.grad(lv.a_node[0]), tp.grad(lv.a_grp[0]),
                tp.grad(phi), tp.grad(z)};
    }
    return tp.val(loss).item();
  };
  CHECK(grad_check(f, params, 1e-6).max_rel_error < 1e-4);
}
