#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hge/graph.hpp"

namespace hge {

// Positive context pairs for one neighborhood scope, plus per-target negative
// pools of equal size. Duplicated positives are kept so co-occurrence
// frequency weights the loss.
struct WalkContext {
  int layer = 0;
  std::vector<std::pair<int, int>> positives;   // (target, context)
  std::vector<std::vector<int>> negatives_of;   // per node id; |pool| == #positives of node

  bool has_negatives() const { return !negatives_of.empty(); }
};

// Uniform neighbor sample of fixed size: without replacement when the degree
// allows, with replacement otherwise. Isolated nodes return themselves
// repeated so batch shapes stay fixed.
std::vector<int> sample_neighbors(const Graph& g, int node, int count, std::uint64_t seed);

// walks_per_node uniform-transition walks from every node; a walk truncates
// when it reaches an isolated node.
std::vector<std::vector<int>> random_walks(const Graph& g, int walks_per_node, int walk_length,
                                           std::uint64_t seed);

// Co-occurrences within window == layer, filtered to graph distance <= layer
// so layer-l context matches the layer's neighborhood scope.
WalkContext context_pairs(const std::vector<std::vector<int>>& walks, int layer, const Graph& g);

// Fills negatives_of: per target, uniform draws from V \ ({target} U adj)
// until the pool matches the positive count (times ratio). Throws when a
// target is adjacent to every other node.
void sample_negatives(const Graph& g, WalkContext& ctx, std::uint64_t seed, int ratio = 1);

// Graph distance capped at max_depth+1 (BFS); helper for scope checks.
int bounded_distance(const Graph& g, int from, int to, int max_depth);

}  // namespace hge
