#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "renaissance/topology.hpp"
#include "renaissance/types.hpp"

namespace renaissance {

struct ControllerConfig {
  // Id space: controllers are 1..n_controllers, switches follow.
  std::uint32_t n_controllers = 0;
  std::uint32_t n_switches = 0;
  std::uint32_t kappa = 1;
  int n_prt = 2;
  std::size_t max_replies = 0;  // 0 means 2 * (n_controllers + n_switches)
  bool three_tag = false;
  bool memory_adaptive = true;

  std::size_t reply_capacity() const {
    return max_replies ? max_replies : 2 * (n_controllers + n_switches);
  }
};

struct ControllerState {
  NodeId id = kNoNode;
  ControllerConfig cfg;
  // Insertion order is kept; the non-memory-adaptive variant evicts the
  // oldest entry when full.
  std::vector<QueryReply> reply_db;
  Tag curr_tag;
  Tag prev_tag;
  Tag before_prev_tag;  // three-tag mode only
  std::uint64_t epoch = 0;
  // Rules for packets this controller originates, refreshed every iteration.
  std::vector<Rule> source_table;
  // Controllers found unreachable when the current round started; their
  // managers and rules are removed from every switch until the next start.
  std::set<NodeId> unreachable;
  std::uint64_t c_resets = 0;
  std::uint64_t rounds = 0;
};

ControllerState make_controller(NodeId id, const ControllerConfig& cfg);

Tag next_tag(ControllerState& s);

// Directed view graph G(S): nodes are reply ids plus reported neighbors,
// edges run from the replying node to each reported neighbor.
struct ViewGraph {
  std::set<NodeId> nodes;
  std::map<NodeId, std::set<NodeId>> out;
  bool operator==(const ViewGraph&) const = default;
};

ViewGraph graph_of(const std::vector<QueryReply>& replies);
std::set<NodeId> reachable(const ViewGraph& g, NodeId from);

// Undirected topology for flow synthesis. A link is used when one side
// reports it and the other side, if it replied at all, agrees. A reply from
// `fresh` (this round) outweighs an older one from the far end.
Graph to_topology(const ViewGraph& g, std::uint32_t n_controllers,
                  std::uint32_t n_switches,
                  const std::set<NodeId>& fresh = {});

// Whether reply m belongs to round x from controller i's point of view:
// the reply carries i's meta-rule and its tag is x. Data rules keep the tag
// of whichever round last updated them, so they are not consulted.
bool tagged(const QueryReply& m, NodeId i, const Tag& x);

// res(x): replies of round x plus the synthetic self-record.
std::vector<QueryReply> res(const ControllerState& s, const Tag& x,
                            const std::vector<NodeId>& nc);

std::vector<QueryReply> fusion(const ControllerState& s,
                               const std::vector<NodeId>& nc);

struct Outbound {
  NodeId dest = kNoNode;
  CommandBatch batch;
};

struct IterationResult {
  bool new_round = false;
  Tag refer_tag;
  std::vector<Outbound> batches;  // ascending destination
};

// One pass of the do-forever loop. `nc` is the local detector's view.
IterationResult iterate(ControllerState& s, const std::vector<NodeId>& nc);

// Returns true when the arrival triggered a C-reset.
bool on_reply(ControllerState& s, const QueryReply& m,
              const std::vector<NodeId>& nc);

QueryReply on_query(const ControllerState& s, NodeId from, const Tag& tag,
                    const std::vector<NodeId>& nc);

// Arbitrary corruption of replyDB, tags and epoch. Replies are drawn over
// the id space so they look plausible.
void corrupt_controller(ControllerState& s, std::mt19937_64& rng);

}  // namespace renaissance
