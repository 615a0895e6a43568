#include <algorithm>
#include <functional>
#include <random>

#include "doctest.h"
#include "renaissance/topology.hpp"

using namespace renaissance;

namespace {

// Controllers 1..nc, each attached to two adjacent ring switches.
Graph ring_with_controllers(std::uint32_t nc, std::uint32_t ns) {
  Graph g(nc, ns);
  for (std::uint32_t i = 0; i < ns; ++i)
    g.add_edge(nc + 1 + i, nc + 1 + (i + 1) % ns);
  for (std::uint32_t c = 1; c <= nc; ++c) {
    NodeId a = nc + 1 + ((c - 1) * ns / nc) % ns;
    g.add_edge(c, a);
    g.add_edge(c, nc + 1 + (a - nc) % ns);
  }
  return g;
}

bool connected_without(const Graph& g, const std::vector<Edge>& cut) {
  auto ns = g.nodes();
  std::vector<bool> seen(g.capacity() + 1, false);
  std::vector<NodeId> stack{ns.front()};
  seen[ns.front()] = true;
  while (!stack.empty()) {
    NodeId u = stack.back();
    stack.pop_back();
    for (NodeId v : g.neighbors(u)) {
      if (seen[v]) continue;
      if (std::find(cut.begin(), cut.end(), make_edge(u, v)) != cut.end())
        continue;
      seen[v] = true;
      stack.push_back(v);
    }
  }
  return std::all_of(ns.begin(), ns.end(), [&](NodeId v) { return seen[v]; });
}

// Smallest edge set whose removal disconnects g, by exhaustive search.
std::uint32_t brute_lambda(const Graph& g) {
  auto es = g.edges();
  if (!connected_without(g, {})) return 0;
  for (std::uint32_t k = 1; k <= es.size(); ++k) {
    std::vector<bool> pick(es.size(), false);
    std::fill(pick.end() - k, pick.end(), true);
    do {
      std::vector<Edge> cut;
      for (std::size_t i = 0; i < es.size(); ++i)
        if (pick[i]) cut.push_back(es[i]);
      if (!connected_without(g, cut)) return k;
    } while (std::next_permutation(pick.begin(), pick.end()));
  }
  return static_cast<std::uint32_t>(es.size());
}

// All simple shortest paths by DFS, the minimum by lexicographic order.
std::optional<std::vector<NodeId>> brute_first_path(const Graph& g, NodeId x,
                                                    NodeId y) {
  std::optional<std::vector<NodeId>> best;
  std::vector<NodeId> path{x};
  std::function<void()> dfs = [&]() {
    NodeId u = path.back();
    if (best && path.size() > best->size()) return;
    if (u == y) {
      if (!best || path.size() < best->size() ||
          (path.size() == best->size() && path < *best))
        best = path;
      return;
    }
    for (NodeId v : g.neighbors(u)) {
      if (std::find(path.begin(), path.end(), v) != path.end()) continue;
      path.push_back(v);
      dfs();
      path.pop_back();
    }
  };
  dfs();
  return best;
}

}  // namespace

TEST_CASE("topology file round trip") {
  Graph g = load_topology("# small\n1 3\n1-2\n2-3\n\n3-4\n4-2\n");
  CHECK(g.n_controllers() == 1);
  CHECK(g.n_switches() == 3);
  CHECK(g.edge_count() == 4);
  CHECK(g.neighbors(2) == std::vector<NodeId>{1, 3, 4});
  CHECK(load_topology(format_topology(g)) == g);
}

TEST_CASE("topology parse errors carry line numbers") {
  auto line_of = [](const char* text) -> std::size_t {
    try {
      load_topology(text);
    } catch (const TopologyError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("1 2\n1-2\n2-1\n") == 3);
  CHECK(line_of("1 2\n1-9\n") == 2);
  CHECK(line_of("x\n") == 1);
  CHECK(line_of("1 2\n\n2-2\n") == 3);
  CHECK(line_of("1 2\n1:2\n") == 2);
}

TEST_CASE("diameter and connectivity of small families") {
  Graph ring = ring_with_controllers(0, 8);
  CHECK(ring.diameter() == 4);
  CHECK(edge_connectivity(ring) == 2);
  CHECK(brute_lambda(ring) == 2);

  Graph path(0, 4);
  path.add_edge(1, 2);
  path.add_edge(2, 3);
  path.add_edge(3, 4);
  CHECK(edge_connectivity(path) == 1);

  Graph k4(0, 4);
  for (NodeId u = 1; u <= 4; ++u)
    for (NodeId v = u + 1; v <= 4; ++v) k4.add_edge(u, v);
  CHECK(edge_connectivity(k4) == 3);
}

TEST_CASE("edge connectivity agrees with exhaustive cut search") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    Graph g(0, 7);
    std::bernoulli_distribution coin(0.45);
    for (NodeId u = 1; u <= 7; ++u)
      for (NodeId v = u + 1; v <= 7; ++v)
        if (coin(rng)) g.add_edge(u, v);
    CHECK(edge_connectivity(g) == brute_lambda(g));
  }
}

TEST_CASE("first shortest path is the lexicographic minimum") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g(0, 9);
    std::bernoulli_distribution coin(0.3);
    for (NodeId u = 1; u <= 9; ++u)
      for (NodeId v = u + 1; v <= 9; ++v)
        if (coin(rng)) g.add_edge(u, v);
    for (NodeId x = 1; x <= 9; ++x)
      for (NodeId y = 1; y <= 9; ++y) {
        if (x == y) continue;
        CHECK(first_shortest_path(g, x, y) == brute_first_path(g, x, y));
      }
  }
}

TEST_CASE("switch-only relaying avoids controllers") {
  // 1 is a controller bridging two switches; 2-3 has a longer switch detour.
  Graph g(1, 4);
  g.add_edge(1, 2);
  g.add_edge(1, 3);
  g.add_edge(2, 4);
  g.add_edge(4, 5);
  g.add_edge(5, 3);
  CHECK(first_shortest_path(g, 2, 3) == std::vector<NodeId>{2, 1, 3});
  CHECK(first_shortest_path(g, 2, 3, RelayPolicy::switches_only) ==
        std::vector<NodeId>{2, 4, 5, 3});
}

TEST_CASE("backup path is edge disjoint from primary") {
  Graph g = ring_with_controllers(2, 8);
  for (NodeId c : g.controllers())
    for (NodeId x : g.nodes()) {
      if (x == c) continue;
      auto fp = flow_paths(g, c, x, 1);
      REQUIRE(fp);
      REQUIRE(!fp->backup.empty());
      std::set<Edge> p1;
      for (std::size_t i = 0; i + 1 < fp->primary.size(); ++i)
        p1.insert(make_edge(fp->primary[i], fp->primary[i + 1]));
      for (std::size_t i = 0; i + 1 < fp->backup.size(); ++i)
        CHECK(!p1.contains(make_edge(fp->backup[i], fp->backup[i + 1])));
      CHECK(fp->backup.front() == c);
      CHECK(fp->backup.back() == x);
    }
}

TEST_CASE("synthesized flows survive any single link failure on a ring") {
  Graph g = ring_with_controllers(2, 8);
  auto all = synthesize_all(g, 1, default_n_prt(1));
  auto rep = verify_resilience(g, all, 1);
  CHECK(rep.pass);
  CHECK(rep.failure_sets == 1 + g.edge_count());
  CHECK(rep.pairs == 2 * 9);
  for (const auto& f : rep.failures) MESSAGE(to_string(f));
}

TEST_CASE("primary-only flows are not resilient") {
  Graph g = ring_with_controllers(1, 6);
  auto all = synthesize_all(g, 0, default_n_prt(0));
  CHECK(verify_resilience(g, all, 0).pass);
  auto rep = verify_resilience(g, all, 1);
  CHECK(!rep.pass);
  REQUIRE(!rep.failures.empty());
  CHECK(rep.failures.front().failed.size() == 1);
}

TEST_CASE("per-switch rule count stays within the bound") {
  Graph g = ring_with_controllers(3, 9);
  auto all = synthesize_all(g, 1, default_n_prt(1));
  std::map<NodeId, std::size_t> per;
  for (const auto& [c, fa] : all)
    for (const auto& [node, rules] : fa)
      if (g.is_switch(node)) per[node] += rules.size();
  std::size_t bound = rule_bound(3, 9, default_n_prt(1));
  for (auto [node, n] : per) CHECK(n <= bound);
}
