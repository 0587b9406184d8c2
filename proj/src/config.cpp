#include "hge/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hge {

using nlohmann::json;

double TrainConfig::tau_at(int epoch) const {
  if (!tau_anneal) return tau;
  if (epochs <= 1) return 0.1;
  double f = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return 1.0 + f * (0.1 - 1.0);
}

void TrainConfig::validate() const {
  if (layer_count < 1) throw ConfigError("layer_count must be at least 1");
  auto need_size = [this](const char* name, std::size_t got) {
    if (static_cast<int>(got) != layer_count)
      throw ConfigError(std::string(name) + " must have one entry per layer (" +
                        std::to_string(layer_count) + "), got " + std::to_string(got));
  };
  need_size("group_counts", group_counts.size());
  need_size("hidden_dims", hidden_dims.size());
  need_size("fanouts", fanouts.size());
  for (std::size_t l = 0; l < group_counts.size(); ++l) {
    if (group_counts[l] < 2) throw ConfigError("group_counts entries must be at least 2");
    if (l > 0 && group_counts[l] >= group_counts[l - 1])
      throw ConfigError("group_counts must be strictly decreasing across layers");
  }
  for (int d : hidden_dims)
    if (d < 1) throw ConfigError("hidden_dims entries must be positive");
  for (int s : fanouts)
    if (s < 1) throw ConfigError("fanouts entries must be positive");
  if (heads < 1) throw ConfigError("heads must be at least 1");
  if (tau <= 0.0) throw ConfigError("tau must be positive");
  if (gamma < 0.0 || beta < 0.0) throw ConfigError("gamma and beta must be nonnegative");
  if (walks_per_node < 1) throw ConfigError("walks_per_node must be positive");
  if (walk_length < 2) throw ConfigError("walk_length must be at least 2");
  if (window >= 0 && window != layer_count)
    throw ConfigError("window must equal layer_count (context scopes are per layer)");
  if (negative_ratio < 1) throw ConfigError("negative_ratio must be at least 1");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
  if (epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be positive");
  if (classification_weight < 0.0) throw ConfigError("classification_weight must be nonnegative");
  if (context_pairs_per_target < 1)
    throw ConfigError("context_pairs_per_target must be positive");
  if (must_cap < 0 || cannot_cap < 0) throw ConfigError("link caps must be nonnegative");
}

namespace {

json to_json(const TrainConfig& c) {
  json j;
  j["layer_count"] = c.layer_count;
  j["group_counts"] = c.group_counts;
  j["hidden_dims"] = c.hidden_dims;
  j["heads"] = c.heads;
  j["tau"] = c.tau;
  j["tau_anneal"] = c.tau_anneal;
  j["gamma"] = c.gamma;
  j["beta"] = c.beta;
  j["fanouts"] = c.fanouts;
  j["walks_per_node"] = c.walks_per_node;
  j["walk_length"] = c.walk_length;
  j["window"] = c.window;
  j["negative_ratio"] = c.negative_ratio;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["early_stop_patience"] = c.early_stop_patience;
  j["seed"] = c.seed;
  j["disable_lambda"] = c.disable_lambda;
  j["membership_agnostic_q"] = c.membership_agnostic_q;
  j["disable_reg"] = c.disable_reg;
  j["classification_weight"] = c.classification_weight;
  j["context_pairs_per_target"] = c.context_pairs_per_target;
  j["must_cap"] = c.must_cap;
  j["cannot_cap"] = c.cannot_cap;
  j["include_self"] = c.include_self;
  j["hard_group_lookup"] = c.hard_group_lookup;
  j["dirichlet_sample"] = c.dirichlet_sample;
  j["two_phase"] = c.two_phase;
  j["log_timing"] = c.log_timing;
  return j;
}

}  // namespace

std::string TrainConfig::to_json_string() const { return to_json(*this).dump(2); }

TrainConfig TrainConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  TrainConfig c;
  const json defaults = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("unknown config key: " + key);
  }
  try {
    auto get = [&j]<typename T>(const char* key, T& out) {
      if (j.contains(key)) out = j.at(key).get<T>();
    };
    get("layer_count", c.layer_count);
    get("group_counts", c.group_counts);
    get("hidden_dims", c.hidden_dims);
    get("heads", c.heads);
    get("tau", c.tau);
    get("tau_anneal", c.tau_anneal);
    get("gamma", c.gamma);
    get("beta", c.beta);
    get("fanouts", c.fanouts);
    get("walks_per_node", c.walks_per_node);
    get("walk_length", c.walk_length);
    get("window", c.window);
    get("negative_ratio", c.negative_ratio);
    get("learning_rate", c.learning_rate);
    get("weight_decay", c.weight_decay);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("early_stop_patience", c.early_stop_patience);
    get("seed", c.seed);
    get("disable_lambda", c.disable_lambda);
    get("membership_agnostic_q", c.membership_agnostic_q);
    get("disable_reg", c.disable_reg);
    get("classification_weight", c.classification_weight);
    get("context_pairs_per_target", c.context_pairs_per_target);
    get("must_cap", c.must_cap);
    get("cannot_cap", c.cannot_cap);
    get("include_self", c.include_self);
    get("hard_group_lookup", c.hard_group_lookup);
    get("dirichlet_sample", c.dirichlet_sample);
    get("two_phase", c.two_phase);
    get("log_timing", c.log_timing);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

std::string TrainConfig::hash() const {
  const std::string dump = to_json(*this).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char ch : dump) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace hge
