#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "renaissance/dataplane.hpp"
#include "renaissance/types.hpp"

namespace renaissance {

using Bytes = std::vector<std::uint8_t>;

// ---- raw links ---------------------------------------------------------

struct LinkFaultPlan {
  std::uint32_t omit_first = 0;       // drop the first N transmissions
  double omit_prob = 0.0;             // then drop at random...
  std::uint32_t max_consecutive = 3;  // ...but never more than this in a row
  double dup_prob = 0.0;

  bool none() const {
    return omit_first == 0 && omit_prob == 0.0 && dup_prob == 0.0;
  }
};

struct LinkFaultState {
  std::uint64_t transmissions = 0;
  std::uint32_t consecutive_omits = 0;
};

// Number of copies the far end receives: 0, 1 or 2.
int link_transmit(const LinkFaultPlan& plan, LinkFaultState& st,
                  std::mt19937_64& rng);

// ---- wire encoding -----------------------------------------------------

Bytes encode_batch(const CommandBatch& batch);
std::optional<CommandBatch> decode_batch(std::span<const std::uint8_t> bytes);
Bytes encode_reply(const QueryReply& reply);
std::optional<QueryReply> decode_reply(std::span<const std::uint8_t> bytes);

// ---- token channel -----------------------------------------------------

// `ghost` identifies the sender-side payload instance a frame belongs to. It
// is bookkeeping for the checkers only and never influences the protocol.
struct Frame {
  std::uint8_t label = 0;
  Bytes payload;
  std::uint64_t ghost = 0;
  bool operator==(const Frame&) const = default;
};

struct InFlight {
  Bytes payload;
  std::uint64_t ghost = 0;
  std::uint64_t born = 0;  // caller's timestamp, opaque to the protocol
};

inline constexpr std::size_t kPendingLimit = 4;

struct ChannelState {
  NodeId sender = kNoNode;
  NodeId receiver = kNoNode;

  // sender side
  std::uint8_t label = 0;
  std::optional<InFlight> in_flight;
  std::deque<InFlight> pending;
  std::uint64_t next_ghost = 1;

  // the two directions; copies of one packet share a slot
  std::vector<Frame> forward;
  std::optional<Frame> backward;

  // receiver side
  std::uint8_t last_label = 1;
  Bytes cached_reply;
  std::uint64_t cached_ghost = 0;

  // counters
  std::uint64_t exchanges = 0;
  std::uint64_t false_acks = 0;
  std::uint64_t dropped_pending = 0;
  std::uint64_t upward = 0;
};

ChannelState make_channel(NodeId sender, NodeId receiver);

// Enqueue; promotes straight to in-flight when idle. Overflow drops the
// oldest pending payload.
void channel_send(ChannelState& ch, Bytes payload, std::uint64_t born = 0);

// Like channel_send, but a payload still waiting in the queue is replaced by
// the newer one instead of queueing behind it. Returns true on replacement.
bool channel_send_latest(ChannelState& ch, Bytes payload,
                         std::uint64_t born = 0);

// The frame to put on the wire now, if the forward direction is free.
std::optional<Frame> channel_transmission(ChannelState& ch);

// Receiver side. Returns the payload to hand upward when the frame carries
// a new label; a repeated label yields nullopt (the cached reply stands).
std::optional<Bytes> channel_receive(ChannelState& ch, const Frame& f);
void channel_set_reply(ChannelState& ch, Bytes reply);
Frame channel_ack(const ChannelState& ch);

struct AckOutcome {
  bool accepted = false;
  bool genuine = false;
  Bytes reply;
};

// Sender side: an ack with the current label completes the exchange.
AckOutcome channel_on_ack(ChannelState& ch, const Frame& ack);

// Exactly one token circulates and the receiver's duplicate filter agrees
// with the sender, so no future ack can be accepted without a genuine
// delivery.
bool single_token(const ChannelState& ch);

// Arbitrary transient corruption of every field, slots included.
void corrupt_channel(ChannelState& ch, std::mt19937_64& rng);

// ---- neighbor failure detector -----------------------------------------

struct DetectorState {
  std::uint32_t theta = 10;
  // since[u][w]: round trips w completed since u's last one
  std::map<NodeId, std::map<NodeId, std::uint32_t>> since;
  std::set<NodeId> failed;
};

DetectorState make_detector(const std::vector<NodeId>& ports,
                            std::uint32_t theta);

// One completed round trip with neighbor v.
void detector_round_trip(DetectorState& d, NodeId v);

// ports minus the flagged ones, sorted.
std::vector<NodeId> detector_view(const DetectorState& d,
                                  const std::vector<NodeId>& ports);

void corrupt_detector(DetectorState& d, const std::vector<NodeId>& ports,
                      std::mt19937_64& rng);

// ---- in-band routing ---------------------------------------------------

// Called once per hop traversed; returns the copies delivered (0 = lost).
using HopHook = std::function<int(NodeId from, NodeId to)>;

struct Route {
  std::vector<NodeId> hops;
  bool delivered = false;
  bool loop = false;
  bool ambiguous = false;
  int copies = 0;
};

// Hop-by-hop over the current tables, same semantics as dataplane replay.
Route route_inband(const ForwardingView& view, NodeId src, NodeId dest,
                   const HopHook& hook);

// Along a fixed path (the reverse of a request trace). Every intermediate
// node must be a switch and every link up.
Route route_along(const ForwardingView& view, const std::vector<NodeId>& path,
                  const HopHook& hook);

}  // namespace renaissance
