#include "hge/graph.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "hge/rng.hpp"

namespace hge {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == '\t' || c == ',' || c == ' ' || c == '\r') {
      if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& tok, const std::string& file, long line) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size())
    throw ParseError(file, line, "expected a number, got '" + tok + "'");
  return v;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  return in;
}

bool header_like(const std::vector<std::string>& toks) {
  // a first row whose second column is non-numeric is treated as a header
  if (toks.size() < 2) return false;
  char* end = nullptr;
  std::strtod(toks[1].c_str(), &end);
  return end != toks[1].c_str() + toks[1].size();
}

void finalize_edges(Graph& g, std::vector<std::pair<int, int>>& raw) {
  for (auto& e : raw) {
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(raw.begin(), raw.end());
  raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
  g.edges.clear();
  g.edges.reserve(raw.size());
  for (const auto& e : raw)
    if (e.first != e.second) g.edges.push_back(e);
  g.adjacency.assign(g.node_count, {});
  for (const auto& e : g.edges) {
    g.adjacency[e.first].push_back(e.second);
    g.adjacency[e.second].push_back(e.first);
  }
  for (auto& a : g.adjacency) std::sort(a.begin(), a.end());
}

void assign_labels(Graph& g, const std::vector<std::string>& raw_labels) {
  std::map<std::string, int> classes;
  for (const auto& s : raw_labels) classes.emplace(s, 0);
  int next = 0;
  for (auto& [name, idx] : classes) idx = next++;
  g.class_count = next;
  g.class_names.clear();
  g.class_names.resize(next);
  for (const auto& [name, idx] : classes) g.class_names[idx] = name;
  g.labels.resize(raw_labels.size());
  for (std::size_t i = 0; i < raw_labels.size(); ++i) g.labels[i] = classes.at(raw_labels[i]);
}

Graph load_citation(const std::string& content_path, const std::string& cites_path) {
  Graph g;
  std::vector<std::string> raw_labels;
  int feat_dim = -1;
  {
    std::ifstream in = open_or_throw(content_path);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto toks = tokenize(line);
      if (toks.empty()) continue;
      if (toks.size() < 3) throw ParseError(content_path, lineno, "row needs id, features, label");
      if (feat_dim < 0) feat_dim = static_cast<int>(toks.size()) - 2;
      if (static_cast<int>(toks.size()) != feat_dim + 2)
        throw ParseError(content_path, lineno,
                         "expected " + std::to_string(feat_dim + 2) + " columns, got " +
                             std::to_string(toks.size()));
      const std::string& id = toks[0];
      if (g.id_index.count(id)) throw ParseError(content_path, lineno, "duplicate node id " + id);
      g.id_index.emplace(id, g.node_count++);
      g.original_ids.push_back(id);
      std::vector<double> row(feat_dim);
      for (int j = 0; j < feat_dim; ++j) row[j] = parse_double(toks[1 + j], content_path, lineno);
      g.features.push_back(std::move(row));
      raw_labels.push_back(toks.back());
    }
  }
  assign_labels(g, raw_labels);

  std::vector<std::pair<int, int>> raw;
  {
    std::ifstream in = open_or_throw(cites_path);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto toks = tokenize(line);
      if (toks.empty()) continue;
      if (toks.size() != 2) throw ParseError(cites_path, lineno, "expected two node ids");
      auto a = g.id_index.find(toks[0]);
      auto b = g.id_index.find(toks[1]);
      if (a == g.id_index.end())
        throw ReferenceError(cites_path + ":" + std::to_string(lineno) +
                             ": unknown node id " + toks[0]);
      if (b == g.id_index.end())
        throw ReferenceError(cites_path + ":" + std::to_string(lineno) +
                             ": unknown node id " + toks[1]);
      raw.emplace_back(a->second, b->second);
    }
  }
  finalize_edges(g, raw);
  return g;
}

Graph load_edgelist(const std::string& features_path, const std::string& edges_path,
                    const std::string& labels_path) {
  // first pass: collect node ids from every file so features/labels may
  // mention isolated nodes
  Graph g;
  auto intern = [&g](const std::string& id) {
    auto it = g.id_index.find(id);
    if (it != g.id_index.end()) return it->second;
    g.id_index.emplace(id, g.node_count);
    g.original_ids.push_back(id);
    return g.node_count++;
  };

  std::vector<std::tuple<int, int>> edge_rows;
  {
    std::ifstream in = open_or_throw(edges_path);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto toks = tokenize(line);
      if (toks.empty()) continue;
      if (lineno == 1 && header_like(toks) && toks.size() == 2 &&
          (toks[0] == "src" || toks[0] == "source"))
        continue;
      if (toks.size() != 2) throw ParseError(edges_path, lineno, "expected 'src dst'");
      const int src = intern(toks[0]);  // sequenced: dense ids follow file order
      const int dst = intern(toks[1]);
      edge_rows.emplace_back(src, dst);
    }
  }

  if (!features_path.empty()) {
    std::ifstream in = open_or_throw(features_path);
    std::string line;
    long lineno = 0;
    int feat_dim = -1;
    std::vector<std::pair<int, std::vector<double>>> rows;
    while (std::getline(in, line)) {
      ++lineno;
      auto toks = tokenize(line);
      if (toks.empty()) continue;
      if (lineno == 1 && header_like(toks)) continue;
      if (toks.size() < 2) throw ParseError(features_path, lineno, "row needs id and features");
      if (feat_dim < 0) feat_dim = static_cast<int>(toks.size()) - 1;
      if (static_cast<int>(toks.size()) != feat_dim + 1)
        throw ParseError(features_path, lineno, "inconsistent feature dimension");
      std::vector<double> row(feat_dim);
      for (int j = 0; j < feat_dim; ++j) row[j] = parse_double(toks[1 + j], features_path, lineno);
      rows.emplace_back(intern(toks[0]), std::move(row));
    }
    g.features.assign(g.node_count, std::vector<double>(std::max(feat_dim, 0), 0.0));
    for (auto& [id, row] : rows) g.features[id] = std::move(row);
  }

  if (!labels_path.empty()) {
    std::ifstream in = open_or_throw(labels_path);
    std::string line;
    long lineno = 0;
    std::vector<std::pair<int, std::string>> rows;
    while (std::getline(in, line)) {
      ++lineno;
      auto toks = tokenize(line);
      if (toks.empty()) continue;
      if (lineno == 1 && header_like(toks) && toks[0] == "id") continue;
      if (toks.size() != 2) throw ParseError(labels_path, lineno, "expected 'id label'");
      rows.emplace_back(intern(toks[0]), toks[1]);
    }
    std::vector<std::string> raw_labels(g.node_count, "");
    for (auto& [id, lab] : rows) raw_labels[id] = lab;
    for (int i = 0; i < g.node_count; ++i)
      if (raw_labels[i].empty())
        throw ReferenceError(labels_path + ": node " + g.original_ids[i] + " has no label");
    assign_labels(g, raw_labels);
  }

  if (!g.features.empty() && static_cast<int>(g.features.size()) != g.node_count)
    g.features.resize(g.node_count, std::vector<double>(g.features[0].size(), 0.0));

  std::vector<std::pair<int, int>> raw;
  raw.reserve(edge_rows.size());
  for (auto& [a, b] : edge_rows) raw.emplace_back(a, b);
  finalize_edges(g, raw);
  return g;
}

}  // namespace

bool Graph::has_edge(int a, int b) const {
  const auto& adj = adjacency[a];
  return std::binary_search(adj.begin(), adj.end(), b);
}

void Graph::validate() const {
  if (static_cast<int>(adjacency.size()) != node_count)
    throw ValidationError("adjacency size mismatch");
  for (int v = 0; v < node_count; ++v) {
    for (int u : adjacency[v]) {
      if (u == v) throw ValidationError("self loop at node " + std::to_string(v));
      if (u < 0 || u >= node_count) throw ValidationError("neighbor id out of range");
      if (!has_edge(u, v)) throw ValidationError("asymmetric adjacency at " + std::to_string(v));
    }
  }
  if (!features.empty()) {
    std::size_t d = features[0].size();
    for (const auto& row : features)
      if (row.size() != d) throw ValidationError("inconsistent feature dimension");
  }
  for (int lab : labels)
    if (lab < 0 || lab >= class_count) throw ValidationError("label out of class range");
}

Graph load_graph(const std::string& content_path, const std::string& edges_path,
                 GraphFormat format, const std::string& labels_path) {
  Graph g = format == GraphFormat::citation ? load_citation(content_path, edges_path)
                                            : load_edgelist(content_path, edges_path, labels_path);
  g.validate();
  return g;
}

Graph make_graph(int node_count, std::vector<std::pair<int, int>> raw_edges,
                 std::vector<std::vector<double>> features, std::vector<int> labels) {
  Graph g;
  g.node_count = node_count;
  for (const auto& e : raw_edges)
    if (e.first < 0 || e.first >= node_count || e.second < 0 || e.second >= node_count)
      throw ReferenceError("edge endpoint out of range");
  g.features = std::move(features);
  if (!labels.empty()) {
    g.labels = std::move(labels);
    g.class_count = *std::max_element(g.labels.begin(), g.labels.end()) + 1;
    for (int c = 0; c < g.class_count; ++c) g.class_names.push_back(std::to_string(c));
  }
  g.original_ids.reserve(node_count);
  for (int i = 0; i < node_count; ++i) {
    g.original_ids.push_back(std::to_string(i));
    g.id_index.emplace(g.original_ids.back(), i);
  }
  finalize_edges(g, raw_edges);
  g.validate();
  return g;
}

Graph load_dataset_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ValidationError("dataset directory not found: " + dir);
  std::string content, cites;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string p = e.path().string();
    if (p.size() > 8 && p.substr(p.size() - 8) == ".content") content = p;
    if (p.size() > 6 && p.substr(p.size() - 6) == ".cites") cites = p;
  }
  if (!content.empty() && !cites.empty())
    return load_graph(content, cites, GraphFormat::citation);

  auto pick = [&dir](std::initializer_list<const char*> names) -> std::string {
    for (const char* n : names) {
      fs::path p = fs::path(dir) / n;
      if (fs::exists(p)) return p.string();
    }
    return "";
  };
  std::string edges = pick({"edges.tsv", "edges.csv", "edgelist.tsv", "edgelist.csv"});
  if (edges.empty())
    throw ValidationError("no citation or edgelist dataset found in " + dir);
  return load_graph(pick({"features.csv", "features.tsv"}), edges, GraphFormat::edgelist,
                    pick({"labels.csv", "labels.tsv"}));
}

std::vector<int> SplitAssignment::test_nodes(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> SplitAssignment::val_nodes(int fold) const {
  return test_nodes((fold + 1) % fold_count);
}

std::vector<int> SplitAssignment::train_nodes(int fold) const {
  const int val = (fold + 1) % fold_count;
  std::vector<int> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold && fold_of[i] != val) out.push_back(static_cast<int>(i));
  return out;
}

SplitAssignment split_nodes(const Graph& g, int fold_count, std::uint64_t seed) {
  if (fold_count < 2) throw ConfigError("fold_count must be at least 2");
  if (fold_count > g.node_count)
    throw ConfigError("fold_count " + std::to_string(fold_count) + " exceeds node count " +
                      std::to_string(g.node_count));
  std::vector<int> order(g.node_count);
  for (int i = 0; i < g.node_count; ++i) order[i] = i;
  Rng rng(seed_tag(seed, "split"));
  rng.shuffle(order);
  SplitAssignment s;
  s.fold_count = fold_count;
  s.fold_of.assign(g.node_count, 0);
  // first (n % F) folds take the extra node
  const int q = g.node_count / fold_count;
  const int r = g.node_count % fold_count;
  int pos = 0;
  for (int f = 0; f < fold_count; ++f) {
    const int size = q + (f < r ? 1 : 0);
    for (int i = 0; i < size; ++i) s.fold_of[order[pos++]] = f;
  }
  return s;
}

void save_split_csv(const std::string& path, const SplitAssignment& split, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << "node_id,fold\n";
  for (int i = 0; i < g.node_count; ++i) out << g.original_ids[i] << "," << split.fold_of[i] << "\n";
}

SplitAssignment load_split_csv(const std::string& path, const Graph& g) {
  std::ifstream in = open_or_throw(path);
  SplitAssignment s;
  s.fold_of.assign(g.node_count, -1);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (lineno == 1 && toks[0] == "node_id") continue;
    if (toks.size() != 2) throw ParseError(path, lineno, "expected 'node_id,fold'");
    auto it = g.id_index.find(toks[0]);
    if (it == g.id_index.end())
      throw ReferenceError(path + ":" + std::to_string(lineno) + ": unknown node " + toks[0]);
    int f = static_cast<int>(parse_double(toks[1], path, lineno));
    s.fold_of[it->second] = f;
    s.fold_count = std::max(s.fold_count, f + 1);
  }
  for (int i = 0; i < g.node_count; ++i)
    if (s.fold_of[i] < 0)
      throw ReferenceError(path + ": node " + g.original_ids[i] + " missing from split");
  return s;
}

}  // namespace hge
