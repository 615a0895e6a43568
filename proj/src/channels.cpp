#include "renaissance/channels.hpp"

#include <algorithm>

namespace renaissance {

int link_transmit(const LinkFaultPlan& plan, LinkFaultState& st,
                  std::mt19937_64& rng) {
  const std::uint64_t n = st.transmissions++;
  if (n < plan.omit_first) return 0;
  if (plan.omit_prob > 0.0 && st.consecutive_omits < plan.max_consecutive) {
    std::bernoulli_distribution omit(plan.omit_prob);
    if (omit(rng)) {
      ++st.consecutive_omits;
      return 0;
    }
  }
  st.consecutive_omits = 0;
  if (plan.dup_prob > 0.0) {
    std::bernoulli_distribution dup(plan.dup_prob);
    if (dup(rng)) return 2;
  }
  return 1;
}

// ---- wire encoding -----------------------------------------------------

namespace {

enum : std::uint8_t { kBatchRecord = 0x01, kReplyRecord = 0x02 };
enum : std::uint8_t {
  kNewRound = 1,
  kDelMngr,
  kAddMngr,
  kDelAllRules,
  kUpdateRules,
  kQuery
};

struct Writer {
  Bytes out;
  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void tag(const Tag& t) {
    u32(t.owner);
    u64(t.epoch);
  }
  void rule(const Rule& r) {
    u32(r.creator);
    u32(r.sw);
    u32(r.src);
    u32(r.dest);
    u32(r.in_port);
    u32(static_cast<std::uint32_t>(r.priority));
    u32(r.fwd);
    tag(r.tag);
  }
  void ids(const std::vector<NodeId>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (NodeId x : v) u32(x);
  }
  void rules(const std::vector<Rule>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (const auto& r : v) rule(r);
  }
};

struct Reader {
  std::span<const std::uint8_t> in;
  std::size_t pos = 0;
  bool ok = true;

  bool need(std::size_t n) {
    if (!ok || in.size() - pos < n) ok = false;
    return ok;
  }
  std::uint8_t u8() {
    if (!need(1)) return 0;
    return in[pos++];
  }
  std::uint32_t u32() {
    if (!need(4)) return 0;
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[pos++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    if (!need(8)) return 0;
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[pos++]} << (8 * i);
    return v;
  }
  Tag tag() {
    Tag t;
    t.owner = u32();
    t.epoch = u64();
    return t;
  }
  Rule rule() {
    Rule r;
    r.creator = u32();
    r.sw = u32();
    r.src = u32();
    r.dest = u32();
    r.in_port = u32();
    r.priority = static_cast<std::int32_t>(u32());
    r.fwd = u32();
    r.tag = tag();
    return r;
  }
  // Counts are checked against what is left so garbage cannot allocate much.
  std::uint32_t count(std::size_t item_size) {
    std::uint32_t n = u32();
    if (ok && static_cast<std::size_t>(n) * item_size > in.size() - pos)
      ok = false;
    return ok ? n : 0;
  }
  std::vector<NodeId> ids() {
    std::vector<NodeId> v(count(4));
    for (auto& x : v) x = u32();
    return v;
  }
  std::vector<Rule> rules() {
    std::vector<Rule> v(count(40));
    for (auto& r : v) r = rule();
    return v;
  }
  bool done() const { return ok && pos == in.size(); }
};

}  // namespace

Bytes encode_batch(const CommandBatch& batch) {
  Writer w;
  w.u8(kBatchRecord);
  w.u32(static_cast<std::uint32_t>(batch.size()));
  for (const auto& c : batch) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, cmd::NewRound>) {
            w.u8(kNewRound);
            w.tag(x.tag);
          } else if constexpr (std::is_same_v<T, cmd::DelMngr>) {
            w.u8(kDelMngr);
            w.u32(x.controller);
          } else if constexpr (std::is_same_v<T, cmd::AddMngr>) {
            w.u8(kAddMngr);
            w.u32(x.controller);
          } else if constexpr (std::is_same_v<T, cmd::DelAllRules>) {
            w.u8(kDelAllRules);
            w.u32(x.controller);
          } else if constexpr (std::is_same_v<T, cmd::UpdateRules>) {
            w.u8(kUpdateRules);
            w.u8(x.keep ? 1 : 0);
            if (x.keep) w.tag(*x.keep);
            w.rules(x.rules);
          } else {
            w.u8(kQuery);
            w.tag(x.tag);
          }
        },
        c);
  }
  return std::move(w.out);
}

std::optional<CommandBatch> decode_batch(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  if (r.u8() != kBatchRecord) return std::nullopt;
  std::uint32_t n = r.count(1);
  CommandBatch batch;
  for (std::uint32_t i = 0; i < n && r.ok; ++i) {
    switch (r.u8()) {
      case kNewRound: batch.push_back(cmd::NewRound{r.tag()}); break;
      case kDelMngr: batch.push_back(cmd::DelMngr{r.u32()}); break;
      case kAddMngr: batch.push_back(cmd::AddMngr{r.u32()}); break;
      case kDelAllRules: batch.push_back(cmd::DelAllRules{r.u32()}); break;
      case kUpdateRules: {
        cmd::UpdateRules up;
        if (r.u8() != 0) up.keep = r.tag();
        up.rules = r.rules();
        batch.push_back(std::move(up));
        break;
      }
      case kQuery: batch.push_back(cmd::Query{r.tag()}); break;
      default: return std::nullopt;
    }
  }
  if (!r.done()) return std::nullopt;
  return batch;
}

Bytes encode_reply(const QueryReply& reply) {
  Writer w;
  w.u8(kReplyRecord);
  w.u32(reply.id);
  w.ids(reply.neighbors);
  w.u8(reply.managers ? 1 : 0);
  if (reply.managers) w.ids(*reply.managers);
  w.rules(reply.rules);
  return std::move(w.out);
}

std::optional<QueryReply> decode_reply(std::span<const std::uint8_t> bytes) {
  Reader r{bytes};
  if (r.u8() != kReplyRecord) return std::nullopt;
  NodeId id = r.u32();
  auto neighbors = r.ids();
  std::optional<std::vector<NodeId>> managers;
  if (r.u8() != 0) managers = r.ids();
  auto rules = r.rules();
  if (!r.done()) return std::nullopt;
  return QueryReply{id, std::move(neighbors), std::move(managers),
                    std::move(rules)};
}

// ---- token channel -----------------------------------------------------

ChannelState make_channel(NodeId sender, NodeId receiver) {
  ChannelState ch;
  ch.sender = sender;
  ch.receiver = receiver;
  return ch;
}

namespace {

void promote(ChannelState& ch) {
  if (ch.in_flight || ch.pending.empty()) return;
  ch.in_flight = std::move(ch.pending.front());
  ch.pending.pop_front();
}

}  // namespace

void channel_send(ChannelState& ch, Bytes payload, std::uint64_t born) {
  ch.pending.push_back(InFlight{std::move(payload), ch.next_ghost++, born});
  while (ch.pending.size() > kPendingLimit) {
    ch.pending.pop_front();
    ++ch.dropped_pending;
  }
  promote(ch);
}

bool channel_send_latest(ChannelState& ch, Bytes payload,
                         std::uint64_t born) {
  if (ch.pending.empty()) {
    channel_send(ch, std::move(payload), born);
    return false;
  }
  ch.pending.back() = InFlight{std::move(payload), ch.next_ghost++, born};
  return true;
}

std::optional<Frame> channel_transmission(ChannelState& ch) {
  promote(ch);  // a corrupted state may hold pending work with nothing in flight
  if (!ch.in_flight || !ch.forward.empty()) return std::nullopt;
  return Frame{ch.label, ch.in_flight->payload, ch.in_flight->ghost};
}

std::optional<Bytes> channel_receive(ChannelState& ch, const Frame& f) {
  if (f.label == ch.last_label) return std::nullopt;
  ch.last_label = f.label;
  ch.cached_ghost = f.ghost;
  ch.cached_reply.clear();
  ++ch.upward;
  return f.payload;
}

void channel_set_reply(ChannelState& ch, Bytes reply) {
  ch.cached_reply = std::move(reply);
}

Frame channel_ack(const ChannelState& ch) {
  return Frame{ch.last_label, ch.cached_reply, ch.cached_ghost};
}

AckOutcome channel_on_ack(ChannelState& ch, const Frame& ack) {
  AckOutcome out;
  if (!ch.in_flight || ack.label != ch.label) return out;
  out.accepted = true;
  out.genuine = ack.ghost == ch.in_flight->ghost;
  out.reply = ack.payload;
  ++ch.exchanges;
  if (!out.genuine) ++ch.false_acks;
  ch.label ^= 1;
  ch.in_flight.reset();
  promote(ch);
  return out;
}

bool single_token(const ChannelState& ch) {
  const std::uint64_t cur = ch.in_flight ? ch.in_flight->ghost : 0;
  // Receiver's duplicate filter must not swallow the next fresh payload.
  if (ch.last_label == ch.label &&
      (!ch.in_flight || ch.cached_ghost != cur))
    return false;
  for (const auto& f : ch.forward) {
    bool live = ch.in_flight && f.label == ch.label && f.ghost == cur;
    bool spent = f.label != ch.label && f.label == ch.last_label &&
                 f.ghost == ch.cached_ghost;
    if (!live && !spent) return false;
  }
  if (ch.backward && ch.backward->label == ch.label) {
    if (!ch.in_flight || ch.backward->ghost != cur ||
        ch.last_label != ch.label || ch.cached_ghost != cur)
      return false;
  }
  return true;
}

void corrupt_channel(ChannelState& ch, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> bit(0, 1);
  std::uniform_int_distribution<int> byte(0, 255);
  // Junk ghosts live in the upper half so they never equal a real one.
  auto junk = [&]() { return rng() | (std::uint64_t{1} << 63); };
  auto bytes = [&]() {
    Bytes b(static_cast<std::size_t>(byte(rng) % 24));
    for (auto& x : b) x = static_cast<std::uint8_t>(byte(rng));
    return b;
  };
  auto frame = [&]() {
    Frame f{static_cast<std::uint8_t>(bit(rng)), bytes(), junk()};
    if (ch.in_flight && bit(rng)) f.ghost = ch.in_flight->ghost;
    return f;
  };

  ch.label = static_cast<std::uint8_t>(bit(rng));
  ch.last_label = static_cast<std::uint8_t>(bit(rng));
  ch.cached_reply = bytes();
  ch.cached_ghost = junk();
  if (bit(rng))
    ch.in_flight = InFlight{bytes(), junk()};
  else
    ch.in_flight.reset();
  ch.pending.clear();
  for (int i = byte(rng) % (kPendingLimit + 1); i > 0; --i)
    ch.pending.push_back(InFlight{bytes(), junk()});
  ch.forward.clear();
  int copies = byte(rng) % 3;
  if (copies > 0) ch.forward.assign(static_cast<std::size_t>(copies), frame());
  if (bit(rng))
    ch.backward = frame();
  else
    ch.backward.reset();
  if (ch.in_flight && ch.last_label == ch.label && bit(rng))
    ch.cached_ghost = ch.in_flight->ghost;
}

// ---- neighbor failure detector -----------------------------------------

DetectorState make_detector(const std::vector<NodeId>& ports,
                            std::uint32_t theta) {
  DetectorState d;
  d.theta = theta;
  for (NodeId u : ports) d.since[u];
  return d;
}

void detector_round_trip(DetectorState& d, NodeId v) {
  d.since[v].clear();
  d.failed.erase(v);
  for (auto& [u, counts] : d.since) {
    if (u == v) continue;
    std::uint32_t& c = counts[v];
    if (c < d.theta) ++c;
    if (c >= d.theta) d.failed.insert(u);
  }
}

std::vector<NodeId> detector_view(const DetectorState& d,
                                  const std::vector<NodeId>& ports) {
  std::vector<NodeId> out;
  for (NodeId u : ports)
    if (!d.failed.contains(u)) out.push_back(u);
  return out;
}

void corrupt_detector(DetectorState& d, const std::vector<NodeId>& ports,
                      std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> cnt(0, d.theta);
  std::bernoulli_distribution coin(0.3);
  d.since.clear();
  d.failed.clear();
  for (NodeId u : ports) {
    auto& m = d.since[u];
    for (NodeId w : ports)
      if (w != u) m[w] = cnt(rng);
    if (coin(rng)) d.failed.insert(u);
  }
}

// ---- in-band routing ---------------------------------------------------

namespace {

std::vector<NodeId> up_ports(const ForwardingView& view, NodeId node) {
  std::vector<NodeId> out;
  for (NodeId v : view.ports(node))
    if (view.link_up(node, v)) out.push_back(v);
  return out;
}

bool traverse(Route& r, const HopHook& hook, NodeId from, NodeId to) {
  int c = hook ? hook(from, to) : 1;
  if (c <= 0) return false;
  r.copies = std::max(r.copies, c);
  r.hops.push_back(to);
  return true;
}

}  // namespace

Route route_inband(const ForwardingView& view, NodeId src, NodeId dest,
                   const HopHook& hook) {
  constexpr std::size_t kHopGuard = 4096;
  Route r;
  r.hops.push_back(src);
  r.copies = 1;
  NodeId cur = src;
  NodeId in = kLocalPort;
  std::set<std::pair<NodeId, NodeId>> seen;
  while (cur != dest) {
    if (!seen.insert({cur, in}).second || r.hops.size() > kHopGuard) {
      r.loop = true;
      return r;
    }
    if (cur != src && !view.is_switch(cur)) return r;
    auto ops = up_ports(view, cur);
    Match m = applicable_rule(view.rules_at(cur), src, dest, in, ops);
    r.ambiguous = r.ambiguous || m.ambiguous;
    NodeId next = kNoNode;
    if (m.rule)
      next = m.rule->fwd;
    else if (std::find(ops.begin(), ops.end(), dest) != ops.end())
      next = dest;
    else
      return r;
    if (!traverse(r, hook, cur, next)) return r;
    in = cur;
    cur = next;
  }
  r.delivered = true;
  return r;
}

Route route_along(const ForwardingView& view, const std::vector<NodeId>& path,
                  const HopHook& hook) {
  Route r;
  if (path.empty()) return r;
  r.hops.push_back(path.front());
  r.copies = 1;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (i > 0 && !view.is_switch(path[i])) return r;
    if (!view.link_up(path[i], path[i + 1])) return r;
    if (!traverse(r, hook, path[i], path[i + 1])) return r;
  }
  r.delivered = true;
  return r;
}

}  // namespace renaissance
