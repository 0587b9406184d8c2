#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "hge/evaluate.hpp"
#include "hge/fixture.hpp"
#include "hge/synthetic.hpp"
#include "hge/trainer.hpp"

using namespace hge;
namespace fs = std::filesystem;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.layer_count = 2;
  cfg.group_counts = {3, 2};
  cfg.hidden_dims = {6, 6};
  cfg.heads = 2;
  cfg.fanouts = {4, 4};
  cfg.walks_per_node = 4;
  cfg.walk_length = 4;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.context_pairs_per_target = 4;
  cfg.must_cap = 32;
  cfg.cannot_cap = 32;
  cfg.log_timing = false;
  cfg.seed = 5;
  return cfg;
}

SyntheticGraph small_synthetic() {
  SyntheticSpec spec;
  spec.fine_groups = 4;
  spec.coarse_groups = 2;
  spec.nodes_per_fine = 10;
  spec.p_intra_fine = 0.5;
  spec.p_intra_coarse = 0.12;
  spec.p_inter_coarse = 0.02;
  spec.feature_dim = 8;
  spec.mean_separation = 3.0;
  spec.noise_scale = 0.5;
  spec.seed = 4;
  return generate_synthetic(spec);
}

bool same_params(ModelParams& a, ModelParams& b) {
  auto ra = a.registry();
  auto rb = b.registry();
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (!ra[i].tensor->same_shape(*rb[i].tensor)) return false;
    for (std::int64_t k = 0; k < ra[i].tensor->size(); ++k)
      if ((*ra[i].tensor)[k] != (*rb[i].tensor)[k]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("seeded training is deterministic") {
  SyntheticGraph sg = small_synthetic();
  TrainConfig cfg = small_config();
  TrainResult a = train(cfg, sg.graph);
  TrainResult b = train(cfg, sg.graph);
  CHECK(a.metrics_jsonl == b.metrics_jsonl);  // byte-identical stream
  CHECK(same_params(a.params, b.params));
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t e = 0; e < a.metrics.size(); ++e)
    CHECK(a.metrics[e].total == doctest::Approx(b.metrics[e].total).epsilon(1e-12));

  TrainConfig other = cfg;
  other.seed = 6;
  TrainResult c = train(other, sg.graph);
  CHECK(a.metrics_jsonl != c.metrics_jsonl);
}

TEST_CASE("disabled regularizer equals zero coefficients") {
  SyntheticGraph sg = small_synthetic();
  TrainConfig zero = small_config();
  zero.gamma = 0.0;
  zero.beta = 0.0;
  TrainConfig off = small_config();
  off.disable_reg = true;
  TrainResult a = train(zero, sg.graph);
  TrainResult b = train(off, sg.graph);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t e = 0; e < a.metrics.size(); ++e)
    CHECK(a.metrics[e].total == doctest::Approx(b.metrics[e].total).epsilon(1e-12));
  // the breakdown drops the reg entries entirely when disabled
  CHECK(b.metrics[0].l_reg.empty());
  CHECK(a.metrics[0].l_reg.size() == 1);
  CHECK(a.metrics[0].l_reg[0] == 0.0);
}

TEST_CASE("ablation switches") {
  TrainConfig cfg = small_config();
  CHECK(apply_ablation(cfg, Ablation::minus_lambda).disable_lambda);
  CHECK(apply_ablation(cfg, Ablation::minus_q).membership_agnostic_q);
  CHECK(apply_ablation(cfg, Ablation::minus_reg).disable_reg);
  CHECK_FALSE(apply_ablation(cfg, Ablation::minus_lambda).disable_reg);
}

TEST_CASE("training reduces the loss on the synthetic fixture") {
  SyntheticGraph sg = small_synthetic();
  TrainConfig cfg = small_config();
  cfg.epochs = 30;
  TrainResult res = train(cfg, sg.graph);
  REQUIRE(res.metrics.size() >= 2);
  CHECK(res.metrics.back().total < res.metrics.front().total);
}

TEST_CASE("checkpoint round trip") {
  SyntheticGraph sg = small_synthetic();
  TrainConfig cfg = small_config();
  TrainResult res = train(cfg, sg.graph);

  fs::path dir = fs::temp_directory_path() / "hge_ckpt_test";
  fs::remove_all(dir);
  save_checkpoint(dir.string(), res.params, res.opt, 3);
  LoadedCheckpoint ck = load_checkpoint(dir.string());
  CHECK(ck.epoch == 3);
  CHECK(same_params(ck.params, res.params));
  CHECK(ck.opt.step == res.opt.step);
  for (std::size_t i = 0; i < ck.opt.m.size(); ++i)
    for (std::int64_t k = 0; k < ck.opt.m[i].size(); ++k) {
      CHECK(ck.opt.m[i][k] == res.opt.m[i][k]);
      CHECK(ck.opt.v[i][k] == res.opt.v[i][k]);
    }

  SUBCASE("saving twice is byte-identical") {
    fs::path dir2 = fs::temp_directory_path() / "hge_ckpt_test2";
    fs::remove_all(dir2);
    save_checkpoint(dir2.string(), res.params, res.opt, 3);
    for (const auto& e : fs::directory_iterator(dir)) {
      std::ifstream a(e.path(), std::ios::binary);
      std::ifstream b(dir2 / e.path().filename(), std::ios::binary);
      std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
      std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
      CHECK(sa == sb);
    }
    fs::remove_all(dir2);
  }

  SUBCASE("mismatched group counts are rejected") {
    nlohmann::json manifest;
    {
      std::ifstream in(dir / "manifest.json");
      in >> manifest;
    }
    manifest["config"]["group_counts"] = std::vector<int>{5, 2};
    {
      std::ofstream out(dir / "manifest.json", std::ios::trunc);
      out << manifest.dump(2);
    }
    CHECK_THROWS_AS(load_checkpoint(dir.string()), IncompatibilityError);
  }
  fs::remove_all(dir);
}

TEST_CASE("resume reproduces the uninterrupted run") {
  SyntheticGraph sg = small_synthetic();
  TrainConfig cfg = small_config();
  cfg.epochs = 6;

  TrainResult full = train(cfg, sg.graph);

  TrainConfig head = cfg;
  head.epochs = 3;
  TrainResult first = train(head, sg.graph);
  TrainInit init;
  init.params = first.params;
  init.opt = first.opt;
  init.start_epoch = 3;
  // resumed leg must use the full-budget config so tau scheduling matches
  TrainResult second = train(cfg, sg.graph, nullptr, -1, init);

  REQUIRE(full.metrics.size() == 6);
  REQUIRE(second.metrics.size() == 3);
  for (int e = 0; e < 3; ++e) {
    CHECK(full.metrics[3 + e].total ==
          doctest::Approx(second.metrics[e].total).epsilon(1e-12));
    CHECK(full.metrics[3 + e].l_cls ==
          doctest::Approx(second.metrics[e].l_cls).epsilon(1e-12));
  }
}

TEST_CASE("non-finite forward aborts with a diagnostic") {
  Graph g = make_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}},
                       std::vector<std::vector<double>>(6, std::vector<double>(4, 1e200)));
  TrainConfig cfg = small_config();
  cfg.layer_count = 1;
  cfg.group_counts = {2};
  cfg.hidden_dims = {4};
  cfg.fanouts = {2};
  cfg.window = 1;
  CHECK_THROWS_WITH_AS(train(cfg, g), doctest::Contains("aborted"), NumericError);
}

TEST_CASE("fixture gradient check stays under 1e-4") {
  GradCheckReport rep = run_fixture_gradcheck(fixture_gradcheck_config(), 1e-4);
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("classification head trains on fold labels only") {
  SyntheticGraph sg = small_synthetic();
  TrainConfig cfg = small_config();
  cfg.epochs = 5;
  SplitAssignment split = split_nodes(sg.graph, 4, cfg.seed);
  TrainResult res = train(cfg, sg.graph, &split, 0);
  CHECK(res.params.class_count == sg.graph.class_count);
  CHECK(res.metrics.back().l_cls > 0.0);
  // unsupervised run has no head
  TrainResult uns = train(cfg, sg.graph);
  CHECK(uns.params.class_count == 0);
  CHECK(uns.metrics.back().l_cls == 0.0);
}
