#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "renaissance/types.hpp"

namespace renaissance {

using Edge = std::pair<NodeId, NodeId>;  // always stored with first < second

inline Edge make_edge(NodeId u, NodeId v) {
  return u < v ? Edge{u, v} : Edge{v, u};
}

class TopologyError : public std::runtime_error {
 public:
  TopologyError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Undirected communication graph with per-edge operational flags. Neighbor
// lists are kept sorted ascending; every tie-break in the project relies on it.
class Graph {
 public:
  Graph() = default;
  Graph(std::uint32_t n_controllers, std::uint32_t n_switches);

  std::uint32_t n_controllers() const { return n_controllers_; }
  std::uint32_t n_switches() const { return n_switches_; }
  std::uint32_t capacity() const { return n_controllers_ + n_switches_; }

  bool in_range(NodeId v) const { return v >= 1 && v <= capacity(); }
  bool contains(NodeId v) const { return in_range(v) && present_[v]; }
  bool is_controller(NodeId v) const {
    return v >= 1 && v <= n_controllers_;
  }
  bool is_switch(NodeId v) const {
    return v > n_controllers_ && v <= capacity();
  }

  std::vector<NodeId> nodes() const;
  std::vector<NodeId> controllers() const;
  std::vector<NodeId> switches() const;

  // Returns false if the edge already existed.
  bool add_edge(NodeId u, NodeId v);
  bool remove_edge(NodeId u, NodeId v);
  bool has_edge(NodeId u, NodeId v) const;

  void add_node(NodeId v);
  // Drops the node and every incident edge.
  void remove_node(NodeId v);

  void set_operational(NodeId u, NodeId v, bool up);
  bool operational(NodeId u, NodeId v) const;

  const std::vector<NodeId>& neighbors(NodeId v) const { return adj_.at(v); }
  std::vector<NodeId> operational_neighbors(NodeId v) const;

  std::vector<Edge> edges() const;
  std::size_t edge_count() const;

  // Largest finite hop distance between present nodes over operational edges.
  std::uint32_t diameter() const;

  bool operator==(const Graph& o) const = default;

 private:
  std::uint32_t n_controllers_ = 0;
  std::uint32_t n_switches_ = 0;
  std::vector<bool> present_;
  std::vector<std::vector<NodeId>> adj_;
  std::set<Edge> down_;
};

Graph load_topology(std::string_view text);
Graph load_topology_file(const std::string& path);
std::string format_topology(const Graph& g);

// Minimum over node pairs of the unit-capacity max-flow on operational edges.
std::uint32_t edge_connectivity(const Graph& g);

// Which nodes may appear strictly inside a path.
enum class RelayPolicy { any, switches_only };

// BFS shortest path over operational edges; ties go to the lexicographically
// smallest node sequence.
std::optional<std::vector<NodeId>> first_shortest_path(
    const Graph& g, NodeId x, NodeId y, RelayPolicy relay = RelayPolicy::any);

struct FlowPaths {
  std::vector<NodeId> primary;
  std::vector<NodeId> backup;  // empty when none exists or kappa == 0
};

// Primary path and (kappa >= 1) an edge-disjoint second path from controller
// c to node x, both relayed by switches only. nullopt when x is unreachable.
std::optional<FlowPaths> flow_paths(const Graph& g, NodeId c, NodeId x,
                                    std::uint32_t kappa);

// Rules for every node (switch tables plus the controller's own source
// table under key c), keyed by node id. Rule vectors are canonical.
using FlowAssignment = std::map<NodeId, std::vector<Rule>>;

FlowAssignment synthesize_flows(const Graph& g, NodeId controller,
                                const Tag& tag, std::uint32_t kappa,
                                int n_prt);

// The rules `controller` installs at `node`.
std::vector<Rule> my_rules(const Graph& g, NodeId controller, NodeId node,
                           const Tag& tag, std::uint32_t kappa, int n_prt);

inline int default_n_prt(std::uint32_t kappa) {
  return static_cast<int>(kappa) + 1;
}

// Per-switch data-rule bound N_C * (N_C + N_S - 1) * n_prt.
std::size_t rule_bound(std::uint32_t n_controllers, std::uint32_t n_switches,
                       int n_prt);

enum class DeliveryFailure { dropped, loop, ambiguous };

struct ResilienceFailure {
  NodeId controller = kNoNode;
  NodeId dest = kNoNode;
  std::vector<Edge> failed;
  DeliveryFailure reason = DeliveryFailure::dropped;
  NodeId at = kNoNode;
};

struct ResilienceReport {
  bool pass = true;
  std::size_t failure_sets = 0;
  std::size_t pairs = 0;
  std::size_t deliveries_checked = 0;
  std::vector<ResilienceFailure> failures;
};

std::string to_string(const ResilienceFailure& f);

// Exhaustive oracle: every failure set of at most kappa operational edges,
// every (controller, reachable node) pair, replayed through the dataplane's
// forwarding semantics. `max_failures` caps the stored witnesses.
ResilienceReport verify_resilience(
    const Graph& g, const std::map<NodeId, FlowAssignment>& assignment,
    std::uint32_t kappa, std::size_t max_failures = 16);

// All live controllers of g synthesizing with a shared tag epoch.
std::map<NodeId, FlowAssignment> synthesize_all(const Graph& g,
                                                std::uint32_t kappa,
                                                int n_prt);

}  // namespace renaissance
