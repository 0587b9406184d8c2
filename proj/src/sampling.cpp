#include "hge/sampling.hpp"

#include <algorithm>
#include <queue>

#include "hge/rng.hpp"

namespace hge {

std::vector<int> sample_neighbors(const Graph& g, int node, int count, std::uint64_t seed) {
  if (node < 0 || node >= g.node_count) throw ReferenceError("sample_neighbors: bad node id");
  if (count <= 0) throw ContractError("sample_neighbors: count must be positive");
  const auto& adj = g.adjacency[node];
  const int deg = static_cast<int>(adj.size());
  std::vector<int> out;
  out.reserve(count);
  if (deg == 0) {
    out.assign(count, node);
    return out;
  }
  Rng rng(seed_mix(seed_tag(seed, "nbr"), static_cast<std::uint64_t>(node)));
  if (deg >= count) {
    // partial Fisher-Yates over a copy
    std::vector<int> pool(adj);
    for (int i = 0; i < count; ++i) {
      int j = i + rng.below_int(deg - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  } else {
    for (int i = 0; i < count; ++i) out.push_back(adj[rng.below_int(deg)]);
  }
  return out;
}

std::vector<std::vector<int>> random_walks(const Graph& g, int walks_per_node, int walk_length,
                                           std::uint64_t seed) {
  if (walk_length < 2) throw ContractError("random_walks: walk_length must be at least 2");
  std::vector<std::vector<int>> walks;
  walks.reserve(static_cast<std::size_t>(g.node_count) * walks_per_node);
  const std::uint64_t base = seed_tag(seed, "walk");
  for (int v = 0; v < g.node_count; ++v) {
    for (int w = 0; w < walks_per_node; ++w) {
      Rng rng(seed_mix(seed_mix(base, v), w));
      std::vector<int> walk{v};
      int cur = v;
      for (int step = 1; step < walk_length; ++step) {
        const auto& adj = g.adjacency[cur];
        if (adj.empty()) break;  // truncate at isolated node
        cur = adj[rng.below_int(static_cast<int>(adj.size()))];
        walk.push_back(cur);
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

int bounded_distance(const Graph& g, int from, int to, int max_depth) {
  if (from == to) return 0;
  std::vector<int> frontier{from};
  std::vector<int> seen(g.node_count, 0);
  seen[from] = 1;
  for (int depth = 1; depth <= max_depth; ++depth) {
    std::vector<int> next;
    for (int u : frontier)
      for (int v : g.adjacency[u]) {
        if (v == to) return depth;
        if (!seen[v]) {
          seen[v] = 1;
          next.push_back(v);
        }
      }
    frontier = std::move(next);
  }
  return max_depth + 1;
}

WalkContext context_pairs(const std::vector<std::vector<int>>& walks, int layer, const Graph& g) {
  if (layer < 1) throw ContractError("context_pairs: layer must be at least 1");
  // raw co-occurrences, bucketed by target so each target's reachable set is
  // computed once
  std::vector<std::vector<int>> contexts(g.node_count);
  for (const auto& walk : walks) {
    const int n = static_cast<int>(walk.size());
    for (int i = 0; i < n; ++i)
      for (int j = std::max(0, i - layer); j <= std::min(n - 1, i + layer); ++j) {
        if (i == j || walk[i] == walk[j]) continue;
        contexts[walk[i]].push_back(walk[j]);
      }
  }

  WalkContext ctx;
  ctx.layer = layer;
  std::vector<int> stamp(g.node_count, -1);
  std::vector<int> frontier, next;
  for (int t = 0; t < g.node_count; ++t) {
    if (contexts[t].empty()) continue;
    // mark nodes within graph distance <= layer of t
    stamp[t] = t;
    frontier.assign(1, t);
    for (int depth = 0; depth < layer; ++depth) {
      next.clear();
      for (int u : frontier)
        for (int v : g.adjacency[u])
          if (stamp[v] != t) {
            stamp[v] = t;
            next.push_back(v);
          }
      frontier = next;
    }
    for (int c : contexts[t])
      if (stamp[c] == t) ctx.positives.emplace_back(t, c);
  }
  return ctx;
}

void sample_negatives(const Graph& g, WalkContext& ctx, std::uint64_t seed, int ratio) {
  if (ctx.positives.empty()) throw ContractError("sample_negatives: no positive pairs");
  if (ratio < 1) throw ContractError("sample_negatives: ratio must be at least 1");
  std::vector<int> pos_count(g.node_count, 0);
  for (const auto& [t, c] : ctx.positives) ++pos_count[t];

  ctx.negatives_of.assign(g.node_count, {});
  const std::uint64_t base = seed_tag(seed, "neg");
  for (int t = 0; t < g.node_count; ++t) {
    const int want = pos_count[t] * ratio;
    if (want == 0) continue;
    if (g.degree(t) + 1 >= g.node_count)
      throw ContractError("negative sampling exhausted: node " + g.original_ids[t] +
                          " is adjacent to all other nodes");
    Rng rng(seed_mix(base, t));
    auto& pool = ctx.negatives_of[t];
    pool.reserve(want);
    while (static_cast<int>(pool.size()) < want) {
      int cand = rng.below_int(g.node_count);
      if (cand == t || g.has_edge(t, cand)) continue;
      pool.push_back(cand);
    }
  }
}

}  // namespace hge
