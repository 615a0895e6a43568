#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "renaissance/channels.hpp"
#include "renaissance/controller.hpp"
#include "renaissance/dataplane.hpp"
#include "renaissance/topology.hpp"

namespace renaissance {

// Tag-synchronization allowance used in the bound formulas.
inline constexpr std::uint32_t kDeltaSynch = 2;
inline constexpr std::uint32_t kDeltaComm = 3;

struct EngineConfig {
  Graph graph;
  std::uint32_t kappa = 1;
  int n_prt = 0;  // 0 means kappa + 1
  bool three_tag = false;
  bool memory_adaptive = true;
  std::uint32_t theta = 10;
  std::size_t max_replies = 0;  // 0 means 2 * (N_C + N_S)
  std::uint64_t seed = 1;
};

enum class FaultKind {
  corrupt_state,
  fail_stop_controller,
  remove_switch,
  remove_link,
  add_link,
  packet_plan,
};

// Bit set of what a CorruptState touches.
enum CorruptScope : unsigned {
  kCorruptSwitches = 1,   // rule tables and manager sets
  kCorruptReplies = 2,    // controller replyDB
  kCorruptChannels = 4,   // channel tokens, labels, queues
  kCorruptTags = 8,       // controller tags and epochs
  kCorruptDetectors = 16,
  kCorruptAll = 31,
};

struct FaultSpec {
  FaultKind kind = FaultKind::corrupt_state;
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  unsigned scope = kCorruptAll;
  std::uint64_t seed = 0;  // corruption only; 0 derives it from the run seed
  LinkFaultPlan plan;
  // Either a step index or "once the run is legitimate".
  std::optional<std::uint64_t> at_step;
  bool at_legitimacy = false;
};

std::string to_string(const FaultSpec& f);

struct LegitReport {
  bool cond[4] = {true, true, true, true};
  std::string witness;    // first failing (controller, node, condition)
  std::string detail[4];  // first witness of each condition
  bool legitimate() const { return cond[0] && cond[1] && cond[2] && cond[3]; }
};

struct InboxItem {
  NodeId ctrl = kNoNode;  // channel owner (the querying controller)
  NodeId peer = kNoNode;  // channel far end
  bool request = true;    // request toward peer, else ack toward ctrl
  std::vector<NodeId> hops;
};

struct Counters {
  std::uint64_t messages = 0;
  std::uint64_t routing_drops = 0;
  std::uint64_t illegit_deletions = 0;
  std::uint64_t superseded = 0;
  std::uint64_t delmngr_sent = 0;  // DelMngr/DelAllRules commands emitted
};

class World {
 public:
  explicit World(EngineConfig cfg);

  void step();
  void inject(const FaultSpec& f);
  LegitReport check_legitimacy() const;

  void set_trace(std::ostream* os) { trace_ = os; }

  // Frame bookkeeping restarts from the current step.
  void reset_frames();
  std::uint64_t frames() const { return frames_; }
  bool frame_closed() const { return frame_closed_; }

  std::uint64_t steps() const { return step_; }
  const Counters& counters() const { return counters_; }
  const Graph& graph() const { return g_; }
  const EngineConfig& config() const { return cfg_; }
  std::uint32_t kappa_effective() const;

  std::vector<NodeId> live_controllers() const;
  bool alive(NodeId v) const;
  const std::map<NodeId, SwitchState>& switches() const { return switches_; }
  const std::map<NodeId, ControllerState>& controllers() const {
    return controllers_;
  }
  const std::map<std::pair<NodeId, NodeId>, ChannelState>& channels() const {
    return channels_;
  }
  const DetectorState& detector(NodeId v) const { return detectors_.at(v); }
  std::vector<NodeId> reported_neighbors(NodeId v) const;

  std::uint64_t c_resets(NodeId c) const;
  std::uint64_t false_acks() const;
  std::uint64_t dropped_pending() const;
  std::size_t max_data_rules() const;
  std::size_t max_reply_db() const;

  // Rules actually installed, per controller, in the oracle's layout.
  std::map<NodeId, FlowAssignment> installed_flows() const;

 private:
  struct Agent {
    enum Kind { sw, rx, tm } kind;
    NodeId node;
  };
  struct Iteration {
    std::uint64_t start = 0;
    std::set<NodeId> dests;
  };
  class View;

  void log(const std::string& kind, NodeId node, const std::string& detail);
  int hop(NodeId u, NodeId v);
  void heartbeat(NodeId v);
  void switch_step(NodeId j);
  void controller_rx(NodeId i);
  void controller_timer(NodeId i);
  void answer(ChannelState& ch, const InboxItem& item, Bytes reply);
  void sync_ports(NodeId v);
  void refresh_reach();
  void track_frames();
  void corrupt(unsigned scope, std::uint64_t seed);

  EngineConfig cfg_;
  Graph g_;
  std::map<NodeId, SwitchState> switches_;
  std::map<NodeId, ControllerState> controllers_;
  std::set<NodeId> failed_;
  std::map<NodeId, DetectorState> detectors_;
  std::map<std::pair<NodeId, NodeId>, ChannelState> channels_;
  std::map<NodeId, std::deque<InboxItem>> inbox_;
  std::map<Edge, LinkFaultPlan> plans_;
  std::map<Edge, LinkFaultState> link_state_;
  std::map<Edge, LinkFaultState> beat_state_;
  std::mt19937_64 rng_;
  std::ostream* trace_ = nullptr;
  Counters counters_;

  std::vector<Agent> cycle_;
  std::size_t cursor_ = 0;
  std::uint64_t step_ = 0;

  // frames
  std::map<std::pair<NodeId, NodeId>, std::uint64_t> last_rt_;
  std::map<NodeId, std::set<NodeId>> reach_;  // ground truth, per controller
  std::map<NodeId, std::deque<Iteration>> open_;
  std::set<NodeId> done_;
  std::uint64_t frame_start_ = 0;
  std::uint64_t frames_ = 0;
  bool frame_closed_ = false;
};

struct PhaseMetrics {
  bool converged = false;
  std::uint64_t frames_to_legit = 0;
  std::uint64_t steps_to_legit = 0;
  std::uint64_t frames = 0;
};

struct RunMetrics {
  bool converged = false;
  std::uint64_t frames_to_legit = 0;  // of the final phase
  std::uint64_t steps_to_legit = 0;
  std::uint64_t steps = 0;
  std::uint64_t frames = 0;
  std::map<NodeId, std::uint64_t> c_resets;
  std::uint64_t illegit_deletions = 0;
  std::uint64_t messages = 0;
  double messages_per_frame = 0.0;
  std::size_t max_rules_per_switch = 0;   // data rules, over legit samples
  std::size_t max_reply_db = 0;           // over legit samples
  std::uint64_t false_acks = 0;
  std::uint64_t routing_drops = 0;
  std::vector<PhaseMetrics> phases;  // one per convergence target
};

struct Scenario {
  std::string id;
  EngineConfig engine;
  std::vector<FaultSpec> faults;
  std::uint64_t max_steps = 200000;
};

// Steps until legitimacy holds at two consecutive frame boundaries after
// the last fault, or max_steps.
RunMetrics run_scenario(const Scenario& sc, std::ostream* trace = nullptr);

}  // namespace renaissance
