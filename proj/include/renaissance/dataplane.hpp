#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "renaissance/types.hpp"

namespace renaissance {

struct SwitchLimits {
  std::size_t max_rules = 1024;
  std::size_t max_managers = 8;
};

struct ManagerEntry {
  NodeId controller = kNoNode;
  std::uint64_t stamp = 0;
  bool operator==(const ManagerEntry&) const = default;
};

// The abstract switch. `ports` is the physical neighborhood N_c(j); rules
// forwarding anywhere else are refused at installation.
struct SwitchState {
  NodeId id = kNoNode;
  std::vector<NodeId> ports;
  std::vector<Rule> rules;
  std::vector<ManagerEntry> managers;
  std::uint64_t next_stamp = 1;
  SwitchLimits limits;

  std::vector<NodeId> manager_ids() const;  // sorted
  const Rule* meta_rule_of(NodeId controller) const;
  std::size_t data_rule_count() const;
};

SwitchState make_switch(NodeId id, std::vector<NodeId> ports,
                        SwitchLimits limits);

struct Match {
  std::optional<Rule> rule;
  // Two different actions tied at the winning priority.
  bool ambiguous = false;
};

// Highest-priority non-meta rule matching (src, dest, in_port) whose out-port
// is operational. Ties go to the lowest creator, then the freshest stamp.
Match applicable_rule(std::span<const Rule> rules, NodeId src, NodeId dest,
                      NodeId in_port, std::span<const NodeId> operational);

struct Packet {
  NodeId src = kNoNode;
  NodeId dest = kNoNode;
  NodeId in_port = kLocalPort;
  bool control = true;
};

struct ForwardDecision {
  enum class Kind { to_port, to_control_module, drop };
  Kind kind = Kind::drop;
  NodeId port = kNoNode;
  bool ambiguous = false;
  bool by_rule = false;
};

// Switch-side forwarding; falls back to direct delivery when the destination
// is an operational neighbor and no rule applies (query-by-neighbor).
ForwardDecision forward(const SwitchState& s, const Packet& p,
                        std::span<const NodeId> operational);

struct BatchResult {
  SwitchState state;
  std::optional<QueryReply> reply;
  std::vector<NodeId> managers_deleted;  // by DelMngr
  std::vector<NodeId> rules_deleted_of;  // by DelAllRules that removed any
  std::size_t evicted_rules = 0;
  std::size_t evicted_managers = 0;
};

// Atomic receive-update-reply. Malformed batches leave the state untouched
// and produce no reply. `reported_neighbors` is the local detector's view.
BatchResult apply_batch(const SwitchState& s, NodeId from,
                        const CommandBatch& batch,
                        const std::vector<NodeId>& reported_neighbors);

struct EvictionCount {
  std::size_t rules = 0;
  std::size_t managers = 0;
};

// Earliest-stamp eviction down to the configured limits.
EvictionCount evict(SwitchState& s);

// Forwarding replay over an arbitrary network view, shared by the resilience
// oracle and in-band routing.
class ForwardingView {
 public:
  virtual ~ForwardingView() = default;
  virtual std::span<const Rule> rules_at(NodeId node) const = 0;
  virtual bool link_up(NodeId u, NodeId v) const = 0;
  virtual const std::vector<NodeId>& ports(NodeId node) const = 0;
  virtual bool is_switch(NodeId node) const = 0;
};

enum class TraceOutcome { delivered, dropped, loop };

struct HopTrace {
  std::vector<NodeId> hops;  // starts at src
  TraceOutcome outcome = TraceOutcome::dropped;
  bool ambiguous = false;
};

// Switches relay by rule (or direct neighbor delivery). A controller only
// forwards packets it originated, using its own source table; anything else
// reaching a non-destination controller is dropped.
HopTrace replay(const ForwardingView& view, NodeId src, NodeId dest,
                std::size_t hop_guard);

}  // namespace renaissance
