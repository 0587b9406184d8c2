// Command-line surface: training, downstream evaluation, exporters, the
// synthetic generator and the gradient-check fixture. Reports are JSON on
// stdout; exit codes: 0 ok, 2 validation error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hge/checkpoint.hpp"
#include "hge/evaluate.hpp"
#include "hge/fixture.hpp"
#include "hge/synthetic.hpp"
#include "hge/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit(const json& report, const std::string& out_path) {
  const std::string text = report.dump(2);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw hge::ValidationError("cannot write report to " + out_path);
    out << text << "\n";
  }
  std::cout << text << std::endl;
}

json metrics_json(const hge::ClassificationMetrics& m) {
  return {{"accuracy", m.accuracy}, {"micro_f1", m.micro_f1}, {"macro_f1", m.macro_f1}};
}

int run(int argc, char** argv) {
  CLI::App app{"hierarchical membership graph embedding"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train on a dataset and write a checkpoint");
  std::string train_config, train_data, train_out;
  std::int64_t train_seed = -1;
  train_cmd->add_option("--config", train_config, "TrainConfig JSON")->required();
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--out", train_out, "output directory")->required();
  train_cmd->add_option("--seed", train_seed, "override the config seed");

  // eval-node
  auto* node_cmd = app.add_subcommand("eval-node", "cross-validated node classification");
  std::string node_ckpt, node_data, node_out;
  int node_folds = 5, node_jobs = 1;
  double node_ref = -1.0;
  node_cmd->add_option("--checkpoint", node_ckpt, "checkpoint directory")->required();
  node_cmd->add_option("--data", node_data, "dataset directory")->required();
  node_cmd->add_option("--folds", node_folds, "fold count");
  node_cmd->add_option("--jobs", node_jobs, "parallel folds");
  node_cmd->add_option("--reference-accuracy", node_ref, "published value to report the gap to");
  node_cmd->add_option("--out", node_out, "also write the report here");

  // eval-link
  auto* link_cmd = app.add_subcommand("eval-link", "held-out edge ranking");
  std::string link_ckpt, link_data, link_out;
  double link_holdout = 0.1;
  int link_negatives = 100;
  link_cmd->add_option("--checkpoint", link_ckpt, "checkpoint directory")->required();
  link_cmd->add_option("--data", link_data, "dataset directory")->required();
  link_cmd->add_option("--holdout", link_holdout, "held-out edge fraction");
  link_cmd->add_option("--negatives", link_negatives, "negatives per candidate set");
  link_cmd->add_option("--out", link_out, "also write the report here");

  // export
  auto* export_cmd = app.add_subcommand("export", "write embeddings/memberships/attention CSV");
  std::string exp_ckpt, exp_data, exp_what, exp_out;
  export_cmd->add_option("--checkpoint", exp_ckpt, "checkpoint directory")->required();
  export_cmd->add_option("--data", exp_data, "dataset directory")->required();
  export_cmd->add_option("--what", exp_what, "embeddings|memberships|attention")->required();
  export_cmd->add_option("--out", exp_out, "output CSV path");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a nested-SBM dataset");
  std::string synth_spec, synth_out;
  synth_cmd->add_option("--spec", synth_spec, "SyntheticSpec JSON")->required();
  synth_cmd->add_option("--out", synth_out, "output dataset directory")->required();

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "fixture gradient check");
  std::string grad_config;
  double grad_eps = 1e-4;
  grad_cmd->add_option("--config", grad_config, "TrainConfig JSON")->required();
  grad_cmd->add_option("--eps", grad_eps, "finite-difference step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*train_cmd) {
    hge::TrainConfig cfg = hge::TrainConfig::from_json_file(train_config);
    if (train_seed >= 0) cfg.seed = static_cast<std::uint64_t>(train_seed);
    hge::Graph g = hge::load_dataset_dir(train_data);
    fs::create_directories(train_out);
    std::ofstream metrics(fs::path(train_out) / "metrics.jsonl", std::ios::trunc);
    hge::TrainResult res = hge::train(cfg, g, nullptr, -1, std::nullopt, &metrics);
    hge::save_checkpoint((fs::path(train_out) / "checkpoint").string(), res.params, res.opt,
                         res.metrics.empty() ? 0 : res.metrics.back().epoch + 1);
    json report{{"task", "train"},
                {"epochs_run", res.epochs_run},
                {"best_epoch", res.best_epoch},
                {"final_total", res.metrics.empty() ? 0.0 : res.metrics.back().total},
                {"checkpoint", (fs::path(train_out) / "checkpoint").string()},
                {"metrics", (fs::path(train_out) / "metrics.jsonl").string()}};
    emit(report, "");
    return 0;
  }

  if (*node_cmd) {
    hge::LoadedCheckpoint ck = hge::load_checkpoint(node_ckpt);
    hge::Graph g = hge::load_dataset_dir(node_data);
    hge::SplitAssignment split = hge::split_nodes(g, node_folds, ck.params.cfg.seed);
    const hge::ModelParams* warm =
        ck.params.cfg.two_phase && ck.epoch > 0 ? &ck.params : nullptr;
    hge::NodeClassificationReport rep =
        hge::eval_node_classification(ck.params.cfg, g, split, warm, node_jobs);
    json report{{"task", "node-classification"}, {"folds", node_folds}};
    json folds = json::array();
    for (const auto& m : rep.per_fold) folds.push_back(metrics_json(m));
    report["per_fold"] = folds;
    report["mean"] = metrics_json(rep.mean);
    report["std"] = metrics_json(rep.stdev);
    if (node_ref > 0.0)
      report["reference"] = {{"accuracy", node_ref}, {"gap", rep.mean.accuracy - node_ref}};
    emit(report, node_out);
    return 0;
  }

  if (*link_cmd) {
    hge::LoadedCheckpoint ck = hge::load_checkpoint(link_ckpt);
    hge::Graph g = hge::load_dataset_dir(link_data);
    const hge::ModelParams* warm =
        ck.params.cfg.two_phase && ck.epoch > 0 ? &ck.params : nullptr;
    hge::LinkPredictionReport rep =
        hge::eval_link_prediction(ck.params.cfg, g, link_holdout, link_negatives, warm);
    json report{{"task", "link-prediction"},
                {"auc", rep.metrics.auc},
                {"mrr", rep.metrics.mrr},
                {"holdout_edges", rep.holdout_edges},
                {"negatives_per_candidate", rep.negatives_per_candidate}};
    emit(report, link_out);
    return 0;
  }

  if (*export_cmd) {
    hge::LoadedCheckpoint ck = hge::load_checkpoint(exp_ckpt);
    hge::Graph g = hge::load_dataset_dir(exp_data);
    const std::string out = exp_out.empty() ? exp_what + ".csv" : exp_out;
    if (exp_what == "embeddings")
      hge::export_embeddings_csv(ck.params, g, out);
    else if (exp_what == "memberships")
      hge::export_memberships_csv(ck.params, g, out);
    else if (exp_what == "attention")
      hge::export_attention_csv(ck.params, g, out);
    else
      throw hge::ValidationError("--what must be embeddings, memberships or attention");
    emit(json{{"task", "export"}, {"what", exp_what}, {"out", out}}, "");
    return 0;
  }

  if (*synth_cmd) {
    hge::SyntheticSpec spec = hge::SyntheticSpec::from_json_file(synth_spec);
    hge::SyntheticGraph sg = hge::generate_synthetic(spec);
    hge::write_synthetic_dataset(synth_out, sg);
    emit(json{{"task", "synth"},
              {"out", synth_out},
              {"nodes", sg.graph.node_count},
              {"edges", sg.graph.edges.size()}},
         "");
    return 0;
  }

  if (*grad_cmd) {
    hge::TrainConfig cfg = hge::TrainConfig::from_json_file(grad_config);
    hge::GradCheckReport rep = hge::run_fixture_gradcheck(cfg, grad_eps);
    const bool ok = rep.max_rel_error < 1e-4;
    emit(json{{"task", "gradcheck"},
              {"max_rel_error", rep.max_rel_error},
              {"eps", grad_eps},
              {"pass", ok}},
         "");
    return ok ? 0 : 3;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const hge::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << std::endl;
    return 3;
  } catch (const hge::ValidationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
