#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hge/common.hpp"

namespace hge {

// Immutable after load; safely shareable across threads.
struct Graph {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;       // undirected, canonical (a < b), sorted
  std::vector<std::vector<double>> features;    // dense rows, one per node (may be empty)
  std::vector<int> labels;                      // empty when the dataset has none
  int class_count = 0;
  std::vector<std::string> class_names;
  std::vector<std::vector<int>> adjacency;      // sorted neighbor ids, no self loops
  std::vector<std::string> original_ids;        // dense id -> original id
  std::unordered_map<std::string, int> id_index;

  int feature_dim() const { return features.empty() ? 0 : static_cast<int>(features[0].size()); }
  int degree(int v) const { return static_cast<int>(adjacency[v].size()); }
  bool has_edge(int a, int b) const;
  bool has_labels() const { return !labels.empty(); }

  // Checks the structural invariants (symmetry, no self loops, feature and
  // label ranges); throws ValidationError on violation.
  void validate() const;
};

enum class GraphFormat { citation, edgelist };

// citation: content = TSV (id, f1..fd, label), edges = TSV (cited, citing).
// edgelist: edges = CSV/TSV (src, dst); content may name a feature CSV
// (id, f1..fd) or be empty; labels_path may name a label CSV (id, label).
Graph load_graph(const std::string& content_path, const std::string& edges_path,
                 GraphFormat format, const std::string& labels_path = "");

// Builds a graph directly from parts; edges are deduplicated, self loops
// dropped and endpoints validated.
Graph make_graph(int node_count, std::vector<std::pair<int, int>> raw_edges,
                 std::vector<std::vector<double>> features = {}, std::vector<int> labels = {});

// Detects the dataset layout inside a directory: either <stem>.content +
// <stem>.cites, or edges.(tsv|csv) with optional features.csv / labels.csv.
Graph load_dataset_dir(const std::string& dir);

struct SplitAssignment {
  int fold_count = 0;
  std::vector<int> fold_of;  // per dense node id

  std::vector<int> test_nodes(int fold) const;
  std::vector<int> val_nodes(int fold) const;  // fold (k+1) mod F
  std::vector<int> train_nodes(int fold) const;
};

// Uniform random partition into fold_count folds; deterministic per seed.
SplitAssignment split_nodes(const Graph& g, int fold_count, std::uint64_t seed);

void save_split_csv(const std::string& path, const SplitAssignment& split, const Graph& g);
SplitAssignment load_split_csv(const std::string& path, const Graph& g);

}  // namespace hge
