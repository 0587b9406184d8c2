#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <queue>
#include <set>

#include "hge/sampling.hpp"

using namespace hge;

namespace {

// independent BFS oracle for distance checks
int bfs_distance(const Graph& g, int from, int to) {
  if (from == to) return 0;
  std::vector<int> dist(g.node_count, -1);
  std::queue<int> q;
  q.push(from);
  dist[from] = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : g.adjacency[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        if (v == to) return dist[v];
        q.push(v);
      }
  }
  return 1 << 20;
}

Graph path3() { return make_graph(3, {{0, 1}, {1, 2}}); }

}  // namespace

TEST_CASE("sample_neighbors") {
  SUBCASE("degree equals count gives a permutation") {
    Graph g = make_graph(4, {{0, 1}, {0, 2}, {0, 3}});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto s = sample_neighbors(g, 0, 3, seed);
      std::vector<int> sorted = s;
      std::sort(sorted.begin(), sorted.end());
      CHECK(sorted == std::vector<int>{1, 2, 3});
    }
  }
  SUBCASE("isolated node repeats itself") {
    Graph g = make_graph(2, {});
    auto s = sample_neighbors(g, 1, 25, 9);
    CHECK(s.size() == 25);
    for (int v : s) CHECK(v == 1);
  }
  SUBCASE("low degree pads with replacement") {
    Graph g = path3();
    auto s = sample_neighbors(g, 0, 5, 3);
    CHECK(s.size() == 5);
    for (int v : s) CHECK(v == 1);
  }
  SUBCASE("deterministic per seed") {
    Graph g = make_graph(10, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {0, 6}});
    CHECK(sample_neighbors(g, 0, 4, 7) == sample_neighbors(g, 0, 4, 7));
    CHECK(sample_neighbors(g, 0, 4, 7) != sample_neighbors(g, 0, 4, 8));
  }
  SUBCASE("binomial inclusion frequency, degree 50 pick 25") {
    std::vector<std::pair<int, int>> edges;
    for (int i = 1; i <= 50; ++i) edges.emplace_back(0, i);
    Graph g = make_graph(51, edges);
    const int trials = 10000;
    std::vector<int> hits(51, 0);
    for (int t = 0; t < trials; ++t) {
      auto s = sample_neighbors(g, 0, 25, 1000 + t);
      CHECK(std::set<int>(s.begin(), s.end()).size() == 25);  // without replacement
      for (int v : s) ++hits[v];
    }
    // inclusion probability 0.5; binomial sigma = sqrt(.25/trials)
    const double sigma = std::sqrt(0.25 / trials);
    for (int i = 1; i <= 50; ++i) {
      double freq = static_cast<double>(hits[i]) / trials;
      CHECK(std::abs(freq - 0.5) <= 3.0 * sigma + 1e-12);
    }
  }
}

TEST_CASE("random_walks") {
  SUBCASE("forced transition on a path") {
    Graph g = path3();
    auto walks = random_walks(g, 10, 4, 5);
    for (const auto& w : walks)
      if (w[0] == 0) {
        REQUIRE(w.size() >= 2);
        CHECK(w[1] == 1);
      }
  }
  SUBCASE("walk count is walks_per_node times nodes") {
    Graph g = make_graph(17, {{0, 1}, {1, 2}, {3, 4}});
    auto walks = random_walks(g, 50, 5, 2);
    CHECK(walks.size() == 17u * 50u);
  }
  SUBCASE("isolated node truncates to length 1") {
    Graph g = make_graph(2, {});
    auto walks = random_walks(g, 3, 5, 1);
    for (const auto& w : walks) CHECK(w.size() == 1);
  }
  SUBCASE("deterministic per seed") {
    Graph g = make_graph(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}});
    CHECK(random_walks(g, 5, 5, 11) == random_walks(g, 5, 5, 11));
    CHECK(random_walks(g, 5, 5, 11) != random_walks(g, 5, 5, 12));
  }
  SUBCASE("walk_length below 2 rejected") {
    Graph g = path3();
    CHECK_THROWS_AS(random_walks(g, 1, 1, 0), ContractError);
  }
}

TEST_CASE("context_pairs") {
  Graph g = path3();
  SUBCASE("window-1 enumeration") {
    WalkContext ctx = context_pairs({{0, 1, 2}}, 1, g);
    std::multiset<std::pair<int, int>> got(ctx.positives.begin(), ctx.positives.end());
    std::multiset<std::pair<int, int>> want{{0, 1}, {1, 0}, {1, 2}, {2, 1}};
    CHECK(got == want);
  }
  SUBCASE("window-2 adds the distance-2 pair") {
    WalkContext ctx = context_pairs({{0, 1, 2}}, 2, g);
    REQUIRE(bfs_distance(g, 0, 2) == 2);
    std::multiset<std::pair<int, int>> got(ctx.positives.begin(), ctx.positives.end());
    std::multiset<std::pair<int, int>> want{{0, 1}, {1, 0}, {1, 2}, {2, 1}, {0, 2}, {2, 0}};
    CHECK(got == want);
  }
  SUBCASE("window-2 drops pairs beyond graph distance") {
    // walk hops across two bridged triangles: co-occurrence at window 2 but
    // graph distance 3 must be filtered
    Graph h = make_graph(4, {{0, 1}, {1, 2}, {2, 3}});
    WalkContext ctx = context_pairs({{0, 1, 2, 3}}, 2, h);
    for (const auto& [t, c] : ctx.positives) CHECK(bfs_distance(h, t, c) <= 2);
    // and (0,3) is not present even though it is 3 apart in no walk window...
    for (const auto& [t, c] : ctx.positives) CHECK(!(t == 0 && c == 3));
  }
  SUBCASE("empty walks") {
    WalkContext ctx = context_pairs({}, 1, g);
    CHECK(ctx.positives.empty());
  }
  SUBCASE("scope property on random walks") {
    Graph h = make_graph(12, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7},
                              {7, 8}, {8, 9}, {9, 10}, {10, 11}, {11, 0}, {0, 6}});
    auto walks = random_walks(h, 5, 6, 3);
    for (int layer : {1, 2}) {
      WalkContext ctx = context_pairs(walks, layer, h);
      for (const auto& [t, c] : ctx.positives) CHECK(bfs_distance(h, t, c) <= layer);
    }
  }
}

TEST_CASE("sample_negatives") {
  SUBCASE("complete graph exhausts") {
    Graph k3 = make_graph(3, {{0, 1}, {0, 2}, {1, 2}});
    WalkContext ctx = context_pairs({{0, 1, 2}}, 1, k3);
    REQUIRE(!ctx.positives.empty());
    CHECK_THROWS_WITH_AS(sample_negatives(k3, ctx, 1), doctest::Contains("exhausted"),
                         ContractError);
  }
  SUBCASE("star graph: leaves sample other leaves") {
    // center 0 adjacent to all leaves 1..4
    Graph star = make_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
    WalkContext ctx;
    ctx.layer = 1;
    ctx.positives = {{1, 0}, {1, 0}, {2, 0}};  // leaf targets only
    sample_negatives(star, ctx, 3);
    CHECK(ctx.negatives_of[1].size() == 2);
    CHECK(ctx.negatives_of[2].size() == 1);
    for (int v : ctx.negatives_of[1]) {
      CHECK(v != 1);
      CHECK(!star.has_edge(1, v));  // other leaves only
    }
    // center as target has no valid negatives
    WalkContext center;
    center.layer = 1;
    center.positives = {{0, 1}};
    CHECK_THROWS_AS(sample_negatives(star, center, 3), ContractError);
  }
  SUBCASE("counts match positives and avoid adjacency") {
    Graph g = make_graph(30, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}, {5, 6}});
    auto walks = random_walks(g, 10, 5, 4);
    WalkContext ctx = context_pairs(walks, 1, g);
    sample_negatives(g, ctx, 9);
    std::vector<int> pos_count(g.node_count, 0);
    for (const auto& [t, c] : ctx.positives) ++pos_count[t];
    for (int v = 0; v < g.node_count; ++v) {
      CHECK(static_cast<int>(ctx.negatives_of[v].size()) == pos_count[v]);
      for (int n : ctx.negatives_of[v]) {
        CHECK(n != v);
        CHECK(!g.has_edge(v, n));
      }
    }
  }
  SUBCASE("ratio scales the pool") {
    Graph g = make_graph(20, {{0, 1}, {1, 2}});
    WalkContext ctx;
    ctx.positives = {{0, 1}, {0, 1}, {0, 1}};
    sample_negatives(g, ctx, 2, 3);
    CHECK(ctx.negatives_of[0].size() == 9);
  }
}
