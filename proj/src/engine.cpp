#include "renaissance/engine.hpp"

#include <algorithm>
#include <sstream>

namespace renaissance {

namespace {

const std::vector<NodeId> kNoPorts;

std::string ids(const std::vector<NodeId>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// Rule content with tag and stamp stripped, for comparing snapshots.
std::vector<Rule> contents(std::vector<Rule> rules) {
  for (auto& r : rules) {
    r.tag = Tag{};
    r.stamp = 0;
  }
  canonicalize(rules);
  return rules;
}

}  // namespace

std::string to_string(const FaultSpec& f) {
  std::ostringstream os;
  switch (f.kind) {
    case FaultKind::corrupt_state: {
      static const char* names[] = {"switches", "replies", "channels", "tags",
                                    "detectors"};
      os << "corrupt scope=";
      if ((f.scope & kCorruptAll) == kCorruptAll) {
        os << "all";
      } else {
        const char* sep = "";
        for (unsigned b = 0; b < 5; ++b)
          if (f.scope & (1u << b)) {
            os << sep << names[b];
            sep = "+";
          }
        if (!*sep) os << "0";
      }
      os << " seed=" << f.seed;
      break;
    }
    case FaultKind::fail_stop_controller: os << "failstop " << f.a; break;
    case FaultKind::remove_switch: os << "remove-switch " << f.a; break;
    case FaultKind::remove_link: os << "remove-link " << f.a << "-" << f.b; break;
    case FaultKind::add_link: os << "add-link " << f.a << "-" << f.b; break;
    case FaultKind::packet_plan:
      os << "packet-plan " << f.a << "-" << f.b << " omit_first="
         << f.plan.omit_first << " omit_prob=" << f.plan.omit_prob
         << " max_consecutive=" << f.plan.max_consecutive
         << " dup_prob=" << f.plan.dup_prob;
      break;
  }
  return os.str();
}

class World::View : public ForwardingView {
 public:
  explicit View(const World& w) : w_(w) {}
  std::span<const Rule> rules_at(NodeId n) const override {
    if (auto it = w_.switches_.find(n); it != w_.switches_.end())
      return it->second.rules;
    if (!w_.alive(n)) return {};
    if (auto it = w_.controllers_.find(n); it != w_.controllers_.end())
      return it->second.source_table;
    return {};
  }
  bool link_up(NodeId u, NodeId v) const override {
    return w_.g_.operational(u, v) && w_.alive(u) && w_.alive(v);
  }
  const std::vector<NodeId>& ports(NodeId n) const override {
    return w_.g_.in_range(n) ? w_.g_.neighbors(n) : kNoPorts;
  }
  bool is_switch(NodeId n) const override {
    return w_.g_.is_switch(n) && w_.g_.contains(n);
  }

 private:
  const World& w_;
};

World::World(EngineConfig cfg)
    : cfg_(std::move(cfg)), g_(cfg_.graph), rng_(cfg_.seed) {
  if (cfg_.n_prt <= 0) cfg_.n_prt = default_n_prt(cfg_.kappa);
  SwitchLimits limits;
  limits.max_rules =
      rule_bound(g_.n_controllers(), g_.n_switches(), cfg_.n_prt) +
      g_.n_controllers();
  limits.max_managers = std::max<std::size_t>(g_.n_controllers(), 1);
  for (NodeId j : g_.switches()) {
    switches_[j] = make_switch(j, g_.neighbors(j), limits);
    detectors_[j] = make_detector(g_.neighbors(j), cfg_.theta);
  }
  ControllerConfig cc;
  cc.n_controllers = g_.n_controllers();
  cc.n_switches = g_.n_switches();
  cc.kappa = cfg_.kappa;
  cc.n_prt = cfg_.n_prt;
  cc.max_replies = cfg_.max_replies;
  cc.three_tag = cfg_.three_tag;
  cc.memory_adaptive = cfg_.memory_adaptive;
  for (NodeId i : g_.controllers()) {
    controllers_[i] = make_controller(i, cc);
    detectors_[i] = make_detector(g_.neighbors(i), cfg_.theta);
  }
  refresh_reach();
  reset_frames();
}

bool World::alive(NodeId v) const {
  return g_.contains(v) && !failed_.contains(v);
}

std::vector<NodeId> World::live_controllers() const {
  std::vector<NodeId> out;
  for (NodeId c : g_.controllers())
    if (alive(c)) out.push_back(c);
  return out;
}

std::vector<NodeId> World::reported_neighbors(NodeId v) const {
  auto it = detectors_.find(v);
  if (it == detectors_.end()) return {};
  return detector_view(it->second, g_.neighbors(v));
}

std::uint32_t World::kappa_effective() const {
  Graph go = g_;
  for (NodeId c : failed_) go.remove_node(c);
  std::uint32_t lambda = edge_connectivity(go);
  return std::min(cfg_.kappa, lambda > 0 ? lambda - 1 : 0);
}

void World::log(const std::string& kind, NodeId node,
                const std::string& detail) {
  if (trace_) *trace_ << step_ << ' ' << kind << ' ' << node << ' ' << detail << '\n';
}

int World::hop(NodeId u, NodeId v) {
  auto it = plans_.find(make_edge(u, v));
  if (it == plans_.end()) return 1;
  return link_transmit(it->second, link_state_[make_edge(u, v)], rng_);
}

void World::heartbeat(NodeId v) {
  auto& d = detectors_[v];
  View view(*this);
  for (NodeId u : g_.neighbors(v)) {
    if (!view.link_up(v, u)) continue;
    auto it = plans_.find(make_edge(u, v));
    if (it != plans_.end()) {
      auto& st = beat_state_[make_edge(u, v)];
      if (link_transmit(it->second, st, rng_) == 0) continue;
      if (link_transmit(it->second, st, rng_) == 0) continue;
    }
    detector_round_trip(d, u);
  }
}

void World::answer(ChannelState& ch, const InboxItem& item, Bytes reply) {
  if (!reply.empty()) channel_set_reply(ch, std::move(reply));
  Frame ack = channel_ack(ch);
  View view(*this);
  const NodeId from = item.peer;
  const NodeId to = item.ctrl;
  std::vector<NodeId> path;

  if (g_.is_controller(from)) {
    // A controller answers over its own flows when they already reach.
    Route probe = route_inband(view, from, to, {});
    if (probe.delivered) path = probe.hops;
  }
  if (path.empty()) {
    std::vector<NodeId> rev(item.hops.rbegin(), item.hops.rend());
    if (route_along(view, rev, {}).delivered) path = std::move(rev);
  }
  if (path.empty()) {
    // The request's route broke since it was taken; reverse today's route.
    Route fwd = route_inband(view, to, from, {});
    if (fwd.delivered) path.assign(fwd.hops.rbegin(), fwd.hops.rend());
  }
  ++counters_.messages;
  Route r;
  if (!path.empty())
    r = route_along(view, path, [this](NodeId u, NodeId v) { return hop(u, v); });
  if (!r.delivered) {
    ++counters_.routing_drops;
    log("drop", from, "ack to=" + std::to_string(to));
    return;
  }
  ch.backward = ack;
  inbox_[to].push_back(InboxItem{to, from, false, r.hops});
}

void World::switch_step(NodeId j) {
  heartbeat(j);
  auto items = std::move(inbox_[j]);
  inbox_[j].clear();
  for (const auto& item : items) {
    if (!item.request) continue;
    auto it = channels_.find({item.ctrl, j});
    if (it == channels_.end() || it->second.forward.empty()) continue;
    ChannelState& ch = it->second;
    Frame f = ch.forward.front();
    ch.forward.erase(ch.forward.begin());
    Bytes reply;
    auto fresh = channel_receive(ch, f);
    if (fresh) {
      auto batch = decode_batch(*fresh);
      if (batch) {
        auto br = apply_batch(switches_.at(j), item.ctrl, *batch,
                              reported_neighbors(j));
        switches_[j] = std::move(br.state);
        for (NodeId k : br.managers_deleted)
          if (alive(k) && g_.is_controller(k)) ++counters_.illegit_deletions;
        for (NodeId k : br.rules_deleted_of)
          if (alive(k) && g_.is_controller(k)) ++counters_.illegit_deletions;
        if (br.reply) reply = encode_reply(*br.reply);
      }
      log("sw", j,
          "apply from=" + std::to_string(item.ctrl) +
              (batch ? " cmds=" + std::to_string(batch->size()) : " malformed"));
    } else {
      log("sw", j, "dup from=" + std::to_string(item.ctrl));
    }
    answer(ch, item, std::move(reply));
  }
}

void World::controller_rx(NodeId i) {
  auto items = std::move(inbox_[i]);
  inbox_[i].clear();
  ControllerState& cs = controllers_.at(i);
  for (const auto& item : items) {
    if (!item.request) {
      auto it = channels_.find({i, item.peer});
      if (it == channels_.end() || !it->second.backward) continue;
      ChannelState& ch = it->second;
      Frame a = *ch.backward;
      ch.backward.reset();
      std::uint64_t born = ch.in_flight ? ch.in_flight->born : 0;
      auto out = channel_on_ack(ch, a);
      if (!out.accepted) continue;
      auto& rt = last_rt_[{i, item.peer}];
      rt = std::max(rt, born);
      auto reply = decode_reply(out.reply);
      std::string detail = "ack from=" + std::to_string(item.peer);
      if (reply) {
        if (on_reply(cs, *reply, reported_neighbors(i))) detail += " c-reset";
      } else {
        detail += " noreply";
      }
      log("rx", i, detail);
      continue;
    }
    auto it = channels_.find({item.ctrl, i});
    if (it == channels_.end() || it->second.forward.empty()) continue;
    ChannelState& ch = it->second;
    Frame f = ch.forward.front();
    ch.forward.erase(ch.forward.begin());
    Bytes reply;
    if (auto fresh = channel_receive(ch, f)) {
      auto batch = decode_batch(*fresh);
      // Everything but the query is ignored by controllers.
      if (batch && well_formed(*batch)) {
        const auto& q = std::get<cmd::Query>(batch->back());
        reply = encode_reply(on_query(cs, item.ctrl, q.tag, reported_neighbors(i)));
      }
      log("rx", i, "query from=" + std::to_string(item.ctrl));
    }
    InboxItem back = item;
    back.peer = i;
    answer(ch, back, std::move(reply));
  }
}

void World::controller_timer(NodeId i) {
  heartbeat(i);
  ControllerState& cs = controllers_.at(i);
  auto nc = reported_neighbors(i);
  IterationResult r = iterate(cs, nc);
  Iteration iter;
  iter.start = step_;
  for (auto& o : r.batches) {
    for (const auto& c : o.batch) {
      if (auto* d = std::get_if<cmd::DelMngr>(&c)) {
        ++counters_.delmngr_sent;
        log("tm", i, "delmngr sw=" + std::to_string(o.dest) + " k=" +
                         std::to_string(d->controller));
      } else if (auto* d = std::get_if<cmd::DelAllRules>(&c)) {
        ++counters_.delmngr_sent;
        log("tm", i, "delrules sw=" + std::to_string(o.dest) + " k=" +
                         std::to_string(d->controller));
      }
    }
    iter.dests.insert(o.dest);
    auto [it, _] = channels_.try_emplace({i, o.dest}, make_channel(i, o.dest));
    if (channel_send_latest(it->second, encode_batch(o.batch), step_))
      ++counters_.superseded;
  }
  auto& open = open_[i];
  open.push_back(std::move(iter));
  if (open.size() > 64) open.pop_front();
  log("tm", i,
      std::string("iter") + (r.new_round ? " round" : "") +
          " curr=" + to_string(cs.curr_tag) + " refer=" + to_string(r.refer_tag) +
          " out=" + std::to_string(r.batches.size()) +
          " db=" + std::to_string(cs.reply_db.size()));

  View view(*this);
  auto hook = [this](NodeId u, NodeId v) { return hop(u, v); };
  for (auto it = channels_.lower_bound({i, 0});
       it != channels_.end() && it->first.first == i; ++it) {
    ChannelState& ch = it->second;
    const NodeId dest = it->first.second;
    auto f = channel_transmission(ch);
    if (!f) continue;
    ++counters_.messages;
    Route route = route_inband(view, i, dest, hook);
    if (!route.delivered) {
      ++counters_.routing_drops;
      log("drop", i, "req to=" + std::to_string(dest) +
                         (route.loop ? " loop" : "") + " at=" +
                         std::to_string(route.hops.back()));
      continue;
    }
    for (int c = 0; c < route.copies; ++c) {
      ch.forward.push_back(*f);
      inbox_[dest].push_back(InboxItem{i, dest, true, route.hops});
    }
  }
}

void World::step() {
  while (true) {
    if (cursor_ >= cycle_.size()) {
      cycle_.clear();
      cursor_ = 0;
      for (const auto& [j, _] : switches_) cycle_.push_back({Agent::sw, j});
      for (NodeId c : live_controllers()) {
        cycle_.push_back({Agent::rx, c});
        cycle_.push_back({Agent::tm, c});
      }
      if (cycle_.empty()) return;
      for (std::size_t k = cycle_.size(); k > 1; --k) {
        std::size_t r = static_cast<std::size_t>(rng_() % k);
        std::swap(cycle_[k - 1], cycle_[r]);
      }
    }
    Agent a = cycle_[cursor_++];
    if (!alive(a.node)) continue;
    ++step_;
    switch (a.kind) {
      case Agent::sw: switch_step(a.node); break;
      case Agent::rx: controller_rx(a.node); break;
      case Agent::tm: controller_timer(a.node); break;
    }
    track_frames();
    return;
  }
}

void World::refresh_reach() {
  reach_.clear();
  View view(*this);
  for (NodeId c : live_controllers()) {
    std::set<NodeId> seen{c};
    std::deque<NodeId> q{c};
    while (!q.empty()) {
      NodeId u = q.front();
      q.pop_front();
      if (u != c && !view.is_switch(u)) continue;
      for (NodeId v : g_.neighbors(u))
        if (view.link_up(u, v) && seen.insert(v).second) q.push_back(v);
    }
    reach_[c] = std::move(seen);
  }
}

void World::reset_frames() {
  frame_start_ = step_ + 1;
  frames_ = 0;
  open_.clear();
  done_.clear();
  frame_closed_ = false;
}

void World::track_frames() {
  frame_closed_ = false;
  auto live = live_controllers();
  if (live.empty()) return;
  for (NodeId c : live) {
    if (done_.contains(c)) continue;
    auto& open = open_[c];
    const auto& reach = reach_[c];
    for (const auto& it : open) {
      if (it.start < frame_start_) continue;
      bool complete = std::all_of(it.dests.begin(), it.dests.end(), [&](NodeId d) {
        if (!reach.contains(d)) return true;
        auto rt = last_rt_.find({c, d});
        return rt != last_rt_.end() && rt->second >= it.start;
      });
      if (complete) {
        done_.insert(c);
        break;
      }
    }
  }
  if (std::all_of(live.begin(), live.end(),
                  [&](NodeId c) { return done_.contains(c); })) {
    ++frames_;
    frame_closed_ = true;
    frame_start_ = step_ + 1;
    done_.clear();
    open_.clear();
    log("frame", 0, std::to_string(frames_));
  }
}

void World::sync_ports(NodeId v) {
  if (!g_.in_range(v)) return;
  const auto& ports = g_.neighbors(v);
  if (auto it = switches_.find(v); it != switches_.end()) it->second.ports = ports;
  auto dit = detectors_.find(v);
  if (dit == detectors_.end()) return;
  auto& d = dit->second;
  auto in_ports = [&](NodeId u) {
    return std::binary_search(ports.begin(), ports.end(), u);
  };
  std::erase_if(d.since, [&](const auto& kv) { return !in_ports(kv.first); });
  for (auto& [_, m] : d.since)
    std::erase_if(m, [&](const auto& kv) { return !in_ports(kv.first); });
  std::erase_if(d.failed, [&](NodeId u) { return !in_ports(u); });
  for (NodeId u : ports) d.since[u];
}

void World::corrupt(unsigned scope, std::uint64_t seed) {
  // Seed 0 ties the corruption to the run seed.
  std::mt19937_64 r(seed ? seed : cfg_.seed * 0x9E3779B97F4A7C15ull + 1);
  const std::uint32_t nc = g_.n_controllers();
  const std::uint32_t n = g_.capacity();
  std::uniform_int_distribution<NodeId> any_node(1, std::max<NodeId>(n, 1));
  std::uniform_int_distribution<NodeId> ctrl(1, std::max<NodeId>(nc, 1));
  std::uniform_int_distribution<std::uint64_t> small(0, 6);
  std::bernoulli_distribution coin(0.5);

  auto random_rule = [&](NodeId at, const std::vector<NodeId>& ports) {
    Rule x;
    x.creator = ctrl(r);
    x.sw = at;
    x.tag = Tag{ctrl(r), small(r)};
    if (coin(r) && coin(r)) return make_meta_rule(x.creator, at, x.tag);
    x.src = coin(r) ? x.creator : kNoNode;
    x.dest = any_node(r);
    if (!ports.empty() && coin(r)) x.in_port = ports[r() % ports.size()];
    x.priority = static_cast<int>(r() % (cfg_.n_prt + 1));
    x.fwd = ports.empty() ? any_node(r) : ports[r() % ports.size()];
    if (x.priority == 0) x.priority = 1;
    return x;
  };

  if (scope & kCorruptSwitches) {
    for (auto& [j, s] : switches_) {
      s.rules.clear();
      s.managers.clear();
      std::size_t count = r() % (s.limits.max_rules + 1);
      for (std::size_t k = 0; k < count; ++k) {
        Rule x = random_rule(j, s.ports);
        x.stamp = k + 1;
        s.rules.push_back(x);
      }
      for (NodeId c = 1; c <= nc; ++c)
        if (coin(r)) s.managers.push_back({c, count + c});
      s.next_stamp = count + nc + 1;
      evict(s);
    }
    for (auto& [i, c] : controllers_) {
      c.source_table.clear();
      for (std::size_t k = r() % 6; k > 0; --k)
        c.source_table.push_back(random_rule(i, g_.neighbors(i)));
    }
  }
  if (scope & (kCorruptReplies | kCorruptTags)) {
    for (auto& [i, c] : controllers_) {
      ControllerState junk = c;
      corrupt_controller(junk, r);
      if (scope & kCorruptReplies) c.reply_db = junk.reply_db;
      if (scope & kCorruptTags) {
        c.curr_tag = junk.curr_tag;
        c.prev_tag = junk.prev_tag;
        c.before_prev_tag = junk.before_prev_tag;
        c.epoch = junk.epoch;
      }
    }
  }
  if (scope & kCorruptChannels) {
    inbox_.clear();
    for (NodeId i : g_.controllers())
      for (NodeId j : g_.nodes()) {
        if (i == j) continue;
        auto [it, _] = channels_.try_emplace({i, j}, make_channel(i, j));
        corrupt_channel(it->second, r);
      }
    for (const auto& [key, ch] : channels_) {
      auto [i, j] = key;
      for (std::size_t k = 0; k < ch.forward.size(); ++k)
        inbox_[j].push_back(InboxItem{i, j, true, {i, j}});
      if (ch.backward) inbox_[i].push_back(InboxItem{i, j, false, {j, i}});
    }
  }
  if (scope & kCorruptDetectors) {
    for (auto& [v, d] : detectors_) corrupt_detector(d, g_.neighbors(v), r);
  }
}

void World::inject(const FaultSpec& f) {
  log("fault", f.a, to_string(f));
  switch (f.kind) {
    case FaultKind::corrupt_state: corrupt(f.scope, f.seed); break;
    case FaultKind::fail_stop_controller:
      if (g_.is_controller(f.a)) {
        failed_.insert(f.a);
        inbox_.erase(f.a);
      }
      break;
    case FaultKind::remove_switch: {
      if (!g_.is_switch(f.a) || !g_.contains(f.a)) break;
      auto nbrs = g_.neighbors(f.a);
      g_.remove_node(f.a);
      switches_.erase(f.a);
      detectors_.erase(f.a);
      inbox_.erase(f.a);
      for (NodeId u : nbrs) sync_ports(u);
      break;
    }
    case FaultKind::remove_link:
      g_.remove_edge(f.a, f.b);
      sync_ports(f.a);
      sync_ports(f.b);
      break;
    case FaultKind::add_link:
      g_.add_edge(f.a, f.b);
      sync_ports(f.a);
      sync_ports(f.b);
      break;
    case FaultKind::packet_plan:
      plans_[make_edge(f.a, f.b)] = f.plan;
      link_state_.erase(make_edge(f.a, f.b));
      beat_state_.erase(make_edge(f.a, f.b));
      break;
  }
  refresh_reach();
}

std::map<NodeId, FlowAssignment> World::installed_flows() const {
  std::map<NodeId, FlowAssignment> out;
  for (NodeId c : live_controllers()) {
    auto& fa = out[c];
    const auto& src = controllers_.at(c).source_table;
    if (!src.empty()) fa[c] = src;
    for (const auto& [j, s] : switches_)
      for (const auto& r : s.rules)
        if (r.creator == c && !r.is_meta()) fa[j].push_back(r);
  }
  return out;
}

LegitReport World::check_legitimacy() const {
  LegitReport rep;
  auto fail = [&](int cond, NodeId c, NodeId node, const std::string& why) {
    if (!rep.cond[cond]) return;
    rep.detail[cond] = "cond" + std::to_string(cond + 1) + " controller=" +
                       std::to_string(c) + " node=" + std::to_string(node) +
                       " " + why;
    if (rep.witness.empty()) rep.witness = rep.detail[cond];
    rep.cond[cond] = false;
  };
  const auto live = live_controllers();
  View view(*this);
  auto truth_neighbors = [&](NodeId v) {
    std::vector<NodeId> out;
    for (NodeId u : g_.neighbors(v))
      if (view.link_up(v, u)) out.push_back(u);
    return out;
  };

  for (NodeId i : live) {
    const auto& cs = controllers_.at(i);
    const auto& comp = reach_.at(i);
    // Condition 1: replyDB mirrors the reachable part of the network.
    if (reported_neighbors(i) != truth_neighbors(i))
      fail(0, i, i, "own neighborhood");
    std::map<NodeId, const QueryReply*> by_id;
    for (const auto& m : cs.reply_db) {
      if (m.id == i) continue;
      if (!by_id.emplace(m.id, &m).second) fail(0, i, m.id, "duplicate reply");
      if (!comp.contains(m.id)) fail(0, i, m.id, "reply from unreachable node");
    }
    for (NodeId k : comp) {
      if (k == i) continue;
      auto it = by_id.find(k);
      if (it == by_id.end()) {
        fail(0, i, k, "missing reply");
        continue;
      }
      const QueryReply& m = *it->second;
      if (m.neighbors != truth_neighbors(k)) fail(0, i, k, "stale neighborhood");
      if (auto sw = switches_.find(k); sw != switches_.end()) {
        if (!m.managers || *m.managers != sw->second.manager_ids())
          fail(0, i, k, "stale managers");
        if (contents(m.rules) != contents(sw->second.rules))
          fail(0, i, k, "stale rules");
      } else if (m.managers) {
        fail(0, i, k, "controller reply with managers");
      }
    }
    // Condition 4 (tags): i's meta-rule tag on every reachable switch is one
    // i currently recognizes.
    for (NodeId k : comp) {
      auto sw = switches_.find(k);
      if (sw == switches_.end()) continue;
      const Rule* meta = sw->second.meta_rule_of(i);
      bool ok = meta && (meta->tag == cs.curr_tag || meta->tag == cs.prev_tag ||
                         (cfg_.three_tag && meta->tag == cs.before_prev_tag));
      if (!ok) fail(3, i, k, "meta-rule tag");
    }
    for (NodeId k : comp) {
      if (k == i) continue;
      auto ch = channels_.find({i, k});
      if (ch != channels_.end() && !single_token(ch->second))
        fail(3, i, k, "channel tokens");
    }
  }

  // Condition 2: every switch reachable from the live controllers is
  // managed by exactly them.
  for (const auto& [k, s] : switches_) {
    std::vector<NodeId> expect;
    for (NodeId i : live)
      if (reach_.at(i).contains(k)) expect.push_back(i);
    if (expect.empty()) continue;
    auto have = s.manager_ids();
    if (have == expect) continue;
    // Name the first controller that is extra or missing.
    std::vector<NodeId> diff;
    std::set_symmetric_difference(have.begin(), have.end(), expect.begin(),
                                  expect.end(), std::back_inserter(diff));
    fail(1, diff.front(), k, "managers " + ids(have) + " want " + ids(expect));
  }

  // Condition 3: the installed rules are resilient on the current network.
  {
    Graph go = g_;
    for (NodeId c : failed_) go.remove_node(c);
    auto r = verify_resilience(go, installed_flows(), kappa_effective(), 1);
    if (!r.pass) {
      const auto& f = r.failures.front();
      fail(2, f.controller, f.dest, to_string(f));
    }
  }
  return rep;
}

std::uint64_t World::c_resets(NodeId c) const {
  auto it = controllers_.find(c);
  return it == controllers_.end() ? 0 : it->second.c_resets;
}

std::uint64_t World::false_acks() const {
  std::uint64_t n = 0;
  for (const auto& [_, ch] : channels_) n += ch.false_acks;
  return n;
}

std::uint64_t World::dropped_pending() const {
  std::uint64_t n = 0;
  for (const auto& [_, ch] : channels_) n += ch.dropped_pending;
  return n;
}

std::size_t World::max_data_rules() const {
  std::size_t n = 0;
  for (const auto& [_, s] : switches_) n = std::max(n, s.data_rule_count());
  return n;
}

std::size_t World::max_reply_db() const {
  std::size_t n = 0;
  for (NodeId c : live_controllers())
    n = std::max(n, controllers_.at(c).reply_db.size());
  return n;
}

RunMetrics run_scenario(const Scenario& sc, std::ostream* trace) {
  World w(sc.engine);
  w.set_trace(trace);
  RunMetrics m;

  std::vector<FaultSpec> timed, on_legit;
  for (const auto& f : sc.faults) (f.at_legitimacy ? on_legit : timed).push_back(f);
  std::stable_sort(timed.begin(), timed.end(), [](const auto& a, const auto& b) {
    return a.at_step.value_or(0) < b.at_step.value_or(0);
  });
  std::size_t next_timed = 0, next_legit = 0;

  m.phases.emplace_back();
  std::uint64_t phase_start = 0;
  int streak = 0;
  auto begin_phase = [&]() {
    if (w.steps() != phase_start || m.phases.back().frames != 0)
      m.phases.emplace_back();
    phase_start = w.steps();
    streak = 0;
    w.reset_frames();
  };

  while (w.steps() < sc.max_steps) {
    bool injected = false;
    while (next_timed < timed.size() &&
           timed[next_timed].at_step.value_or(0) <= w.steps()) {
      w.inject(timed[next_timed++]);
      injected = true;
    }
    if (injected) begin_phase();

    w.step();
    if (!w.frame_closed()) continue;
    auto& ph = m.phases.back();
    ph.frames = w.frames();
    if (!w.check_legitimacy().legitimate()) {
      streak = 0;
      ph.converged = false;
      continue;
    }
    if (streak == 0) {
      ph.frames_to_legit = w.frames();
      ph.steps_to_legit = w.steps() - phase_start;
    }
    ++streak;
    m.max_rules_per_switch = std::max(m.max_rules_per_switch, w.max_data_rules());
    m.max_reply_db = std::max(m.max_reply_db, w.max_reply_db());
    if (streak < 2) continue;
    ph.converged = true;
    if (next_legit < on_legit.size()) {
      w.inject(on_legit[next_legit++]);
      begin_phase();
      continue;
    }
    if (next_timed >= timed.size()) break;
  }

  const auto& last = m.phases.back();
  m.converged = last.converged;
  m.frames_to_legit = last.frames_to_legit;
  m.steps_to_legit = last.steps_to_legit;
  m.steps = w.steps();
  for (const auto& ph : m.phases) m.frames += ph.frames;
  for (NodeId c : w.graph().controllers()) m.c_resets[c] = w.c_resets(c);
  m.illegit_deletions = w.counters().illegit_deletions;
  m.messages = w.counters().messages;
  m.messages_per_frame =
      m.frames ? static_cast<double>(m.messages) / static_cast<double>(m.frames)
               : 0.0;
  m.false_acks = w.false_acks();
  m.routing_drops = w.counters().routing_drops;
  return m;
}

}  // namespace renaissance
