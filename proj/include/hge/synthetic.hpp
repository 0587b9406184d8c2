#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hge/graph.hpp"

namespace hge {

// Nested stochastic block model with Gaussian feature bumps per fine group.
// Used as the hierarchy-recovery oracle: planted partitions come back with
// the graph for NMI scoring.
struct SyntheticSpec {
  int fine_groups = 4;
  int coarse_groups = 2;
  std::vector<int> nesting;  // fine -> coarse; empty means round-robin
  int nodes_per_fine = 50;
  double p_intra_fine = 0.3;
  double p_intra_coarse = 0.05;
  double p_inter_coarse = 0.005;
  int feature_dim = 16;
  std::vector<std::vector<double>> group_means;  // optional explicit means per fine group
  double mean_separation = 2.0;  // pairwise mean distance in units of noise_scale
  double noise_scale = 1.0;
  std::uint64_t seed = 1;

  std::vector<int> resolved_nesting() const;
  void validate() const;

  std::string to_json_string() const;
  static SyntheticSpec from_json_string(const std::string& text);
  static SyntheticSpec from_json_file(const std::string& path);
};

struct SyntheticGraph {
  Graph graph;  // labels carry the coarse partition
  std::vector<int> fine;
  std::vector<int> coarse;
};

SyntheticGraph generate_synthetic(const SyntheticSpec& spec);

// Writes the dataset in edgelist layout (edges.tsv, features.csv, labels.csv)
// plus planted.csv (node_id, fine, coarse).
void write_synthetic_dataset(const std::string& dir, const SyntheticGraph& sg);

}  // namespace hge
