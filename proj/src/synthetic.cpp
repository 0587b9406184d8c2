#include "hge/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hge/rng.hpp"

namespace hge {

using nlohmann::json;

std::vector<int> SyntheticSpec::resolved_nesting() const {
  if (!nesting.empty()) return nesting;
  std::vector<int> map(fine_groups);
  for (int f = 0; f < fine_groups; ++f) map[f] = f % coarse_groups;
  return map;
}

void SyntheticSpec::validate() const {
  if (fine_groups < 1 || coarse_groups < 1 || nodes_per_fine < 1)
    throw ConfigError("synthetic spec: counts must be positive");
  if (coarse_groups > fine_groups)
    throw ConfigError("synthetic spec: coarse groups cannot exceed fine groups");
  const auto map = resolved_nesting();
  if (static_cast<int>(map.size()) != fine_groups)
    throw ConfigError("synthetic spec: nesting must map every fine group");
  std::vector<bool> used(coarse_groups, false);
  for (int c : map) {
    if (c < 0 || c >= coarse_groups) throw ConfigError("synthetic spec: nesting out of range");
    used[c] = true;
  }
  for (bool u : used)
    if (!u) throw ConfigError("synthetic spec: nesting must cover every coarse group");
  for (double p : {p_intra_fine, p_intra_coarse, p_inter_coarse})
    if (p < 0.0 || p > 1.0) throw ConfigError("synthetic spec: probabilities must be in [0,1]");
  if (!(p_intra_fine > p_intra_coarse && p_intra_coarse > p_inter_coarse))
    throw ConfigError("synthetic spec: need p_intra_fine > p_intra_coarse > p_inter_coarse");
  if (feature_dim < 1) throw ConfigError("synthetic spec: feature_dim must be positive");
  if (group_means.empty() && feature_dim < fine_groups)
    throw ConfigError("synthetic spec: feature_dim must reach fine_groups for derived means");
  if (!group_means.empty()) {
    if (static_cast<int>(group_means.size()) != fine_groups)
      throw ConfigError("synthetic spec: group_means must have one row per fine group");
    for (const auto& m : group_means)
      if (static_cast<int>(m.size()) != feature_dim)
        throw ConfigError("synthetic spec: group_means rows must match feature_dim");
  }
  if (noise_scale < 0.0) throw ConfigError("synthetic spec: noise_scale must be nonnegative");
  if (mean_separation < 0.0) throw ConfigError("synthetic spec: mean_separation must be nonnegative");
}

SyntheticGraph generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto nest = spec.resolved_nesting();
  const int n = spec.fine_groups * spec.nodes_per_fine;

  SyntheticGraph sg;
  sg.fine.resize(n);
  sg.coarse.resize(n);
  for (int v = 0; v < n; ++v) {
    sg.fine[v] = v / spec.nodes_per_fine;
    sg.coarse[v] = nest[sg.fine[v]];
  }

  // means: explicit, or axis-aligned so pairwise distance = separation*sigma
  std::vector<std::vector<double>> means = spec.group_means;
  if (means.empty()) {
    means.assign(spec.fine_groups, std::vector<double>(spec.feature_dim, 0.0));
    const double scale = spec.mean_separation * spec.noise_scale / std::sqrt(2.0);
    for (int f = 0; f < spec.fine_groups; ++f) means[f][f] = scale;
  }

  Rng rng(seed_tag(spec.seed, "synth"));
  std::vector<std::vector<double>> features(n, std::vector<double>(spec.feature_dim));
  for (int v = 0; v < n; ++v)
    for (int d = 0; d < spec.feature_dim; ++d)
      features[v][d] = means[sg.fine[v]][d] + spec.noise_scale * rng.normal();

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double p = sg.fine[i] == sg.fine[j]       ? spec.p_intra_fine
                 : sg.coarse[i] == sg.coarse[j] ? spec.p_intra_coarse
                                                : spec.p_inter_coarse;
      if (rng.uniform() < p) edges.emplace_back(i, j);
    }

  sg.graph = make_graph(n, std::move(edges), std::move(features), sg.coarse);
  return sg;
}

void write_synthetic_dataset(const std::string& dir, const SyntheticGraph& sg) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const Graph& g = sg.graph;
  {
    std::ofstream out(fs::path(dir) / "edges.tsv");
    for (const auto& [a, b] : g.edges) out << a << "\t" << b << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "features.csv");
    for (int v = 0; v < g.node_count; ++v) {
      out << v;
      for (double x : g.features[v]) out << "," << x;
      out << "\n";
    }
  }
  {
    std::ofstream out(fs::path(dir) / "labels.csv");
    for (int v = 0; v < g.node_count; ++v) out << v << "," << sg.coarse[v] << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "planted.csv");
    out << "node_id,fine,coarse\n";
    for (int v = 0; v < g.node_count; ++v)
      out << v << "," << sg.fine[v] << "," << sg.coarse[v] << "\n";
  }
}

namespace {

json spec_to_json(const SyntheticSpec& s) {
  json j;
  j["fine_groups"] = s.fine_groups;
  j["coarse_groups"] = s.coarse_groups;
  j["nesting"] = s.nesting;
  j["nodes_per_fine"] = s.nodes_per_fine;
  j["p_intra_fine"] = s.p_intra_fine;
  j["p_intra_coarse"] = s.p_intra_coarse;
  j["p_inter_coarse"] = s.p_inter_coarse;
  j["feature_dim"] = s.feature_dim;
  j["group_means"] = s.group_means;
  j["mean_separation"] = s.mean_separation;
  j["noise_scale"] = s.noise_scale;
  j["seed"] = s.seed;
  return j;
}

}  // namespace

std::string SyntheticSpec::to_json_string() const { return spec_to_json(*this).dump(2); }

SyntheticSpec SyntheticSpec::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  SyntheticSpec s;
  const json known = spec_to_json(s);
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown synthetic spec key: " + key);
  try {
    auto get = [&j]<typename T>(const char* key, T& out) {
      if (j.contains(key)) out = j.at(key).get<T>();
    };
    get("fine_groups", s.fine_groups);
    get("coarse_groups", s.coarse_groups);
    get("nesting", s.nesting);
    get("nodes_per_fine", s.nodes_per_fine);
    get("p_intra_fine", s.p_intra_fine);
    get("p_intra_coarse", s.p_intra_coarse);
    get("p_inter_coarse", s.p_inter_coarse);
    get("feature_dim", s.feature_dim);
    get("group_means", s.group_means);
    get("mean_separation", s.mean_separation);
    get("noise_scale", s.noise_scale);
    get("seed", s.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec field has wrong type: ") + e.what());
  }
  s.validate();
  return s;
}

SyntheticSpec SyntheticSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synthetic spec: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

}  // namespace hge
