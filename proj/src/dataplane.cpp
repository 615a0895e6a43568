#include "renaissance/dataplane.hpp"

#include <algorithm>
#include <set>
#include <utility>

namespace renaissance {

std::vector<NodeId> SwitchState::manager_ids() const {
  std::vector<NodeId> out;
  out.reserve(managers.size());
  for (const auto& m : managers) out.push_back(m.controller);
  std::sort(out.begin(), out.end());
  return out;
}

const Rule* SwitchState::meta_rule_of(NodeId controller) const {
  for (const auto& r : rules)
    if (r.creator == controller && r.is_meta()) return &r;
  return nullptr;
}

std::size_t SwitchState::data_rule_count() const {
  return static_cast<std::size_t>(std::count_if(
      rules.begin(), rules.end(), [](const Rule& r) { return !r.is_meta(); }));
}

SwitchState make_switch(NodeId id, std::vector<NodeId> ports,
                        SwitchLimits limits) {
  SwitchState s;
  s.id = id;
  std::sort(ports.begin(), ports.end());
  s.ports = std::move(ports);
  s.limits = limits;
  return s;
}

Match applicable_rule(std::span<const Rule> rules, NodeId src, NodeId dest,
                      NodeId in_port, std::span<const NodeId> operational) {
  Match out;
  const Rule* best = nullptr;
  for (const auto& r : rules) {
    if (r.is_meta() || r.fwd == kNoNode) continue;
    if (r.src != kNoNode && r.src != src) continue;
    if (r.dest != kNoNode && r.dest != dest) continue;
    if (r.in_port != kAnyPort && r.in_port != in_port) continue;
    if (std::find(operational.begin(), operational.end(), r.fwd) ==
        operational.end())
      continue;
    if (best == nullptr || r.priority > best->priority) {
      best = &r;
      out.ambiguous = false;
      continue;
    }
    if (r.priority < best->priority) continue;
    if (r.fwd != best->fwd) out.ambiguous = true;
    if (r.creator < best->creator ||
        (r.creator == best->creator && r.stamp > best->stamp))
      best = &r;
  }
  if (best != nullptr) out.rule = *best;
  return out;
}

ForwardDecision forward(const SwitchState& s, const Packet& p,
                        std::span<const NodeId> operational) {
  ForwardDecision d;
  if (p.dest == s.id) {
    d.kind = p.control ? ForwardDecision::Kind::to_control_module
                       : ForwardDecision::Kind::drop;
    return d;
  }
  Match m = applicable_rule(s.rules, p.src, p.dest, p.in_port, operational);
  d.ambiguous = m.ambiguous;
  if (m.rule) {
    d.kind = ForwardDecision::Kind::to_port;
    d.port = m.rule->fwd;
    d.by_rule = true;
    return d;
  }
  if (std::find(operational.begin(), operational.end(), p.dest) !=
      operational.end()) {
    d.kind = ForwardDecision::Kind::to_port;
    d.port = p.dest;
  }
  return d;
}

EvictionCount evict(SwitchState& s) {
  EvictionCount n;
  while (s.rules.size() > s.limits.max_rules) {
    auto it = std::min_element(
        s.rules.begin(), s.rules.end(),
        [](const Rule& a, const Rule& b) { return a.stamp < b.stamp; });
    s.rules.erase(it);
    ++n.rules;
  }
  while (s.managers.size() > s.limits.max_managers) {
    auto it = std::min_element(s.managers.begin(), s.managers.end(),
                               [](const ManagerEntry& a, const ManagerEntry& b) {
                                 return a.stamp < b.stamp;
                               });
    s.managers.erase(it);
    ++n.managers;
  }
  return n;
}

namespace {

void refresh(SwitchState& s, NodeId from) {
  // Stamp order among the refreshed items is preserved.
  std::vector<std::uint64_t*> items;
  for (auto& r : s.rules)
    if (r.creator == from) items.push_back(&r.stamp);
  for (auto& m : s.managers)
    if (m.controller == from) items.push_back(&m.stamp);
  std::sort(items.begin(), items.end(),
            [](const std::uint64_t* a, const std::uint64_t* b) {
              return *a < *b;
            });
  for (auto* st : items) *st = s.next_stamp++;
}

void insert_rule(SwitchState& s, Rule r, BatchResult& res) {
  r.stamp = s.next_stamp++;
  s.rules.push_back(std::move(r));
  auto n = evict(s);
  res.evicted_rules += n.rules;
  res.evicted_managers += n.managers;
}

bool port_ok(const SwitchState& s, NodeId fwd) {
  return fwd == kNoNode ||
         std::binary_search(s.ports.begin(), s.ports.end(), fwd);
}

}  // namespace

BatchResult apply_batch(const SwitchState& s, NodeId from,
                        const CommandBatch& batch,
                        const std::vector<NodeId>& reported_neighbors) {
  BatchResult res;
  res.state = s;
  if (!well_formed(batch) || from == kNoNode) return res;

  SwitchState& st = res.state;
  refresh(st, from);

  for (const auto& c : batch) {
    if (const auto* nr = std::get_if<cmd::NewRound>(&c)) {
      std::erase_if(st.rules, [&](const Rule& r) {
        return r.creator == from && r.is_meta();
      });
      insert_rule(st, make_meta_rule(from, st.id, nr->tag), res);
    } else if (const auto* dm = std::get_if<cmd::DelMngr>(&c)) {
      auto n = std::erase_if(st.managers, [&](const ManagerEntry& m) {
        return m.controller == dm->controller;
      });
      if (n > 0) res.managers_deleted.push_back(dm->controller);
    } else if (const auto* am = std::get_if<cmd::AddMngr>(&c)) {
      bool known = std::any_of(
          st.managers.begin(), st.managers.end(),
          [&](const ManagerEntry& m) { return m.controller == am->controller; });
      if (!known && am->controller != kNoNode) {
        st.managers.push_back({am->controller, st.next_stamp++});
        auto n = evict(st);
        res.evicted_rules += n.rules;
        res.evicted_managers += n.managers;
      }
    } else if (const auto* da = std::get_if<cmd::DelAllRules>(&c)) {
      auto n = std::erase_if(st.rules, [&](const Rule& r) {
        return r.creator == da->controller;
      });
      if (n > 0) res.rules_deleted_of.push_back(da->controller);
    } else if (const auto* up = std::get_if<cmd::UpdateRules>(&c)) {
      std::vector<Rule> incoming;
      for (Rule r : up->rules) {
        if (r.is_meta() || !port_ok(st, r.fwd)) continue;
        r.creator = from;
        r.sw = st.id;
        incoming.push_back(r);
      }
      std::erase_if(st.rules, [&](const Rule& r) {
        if (r.creator != from || r.is_meta()) return false;
        if (up->keep && r.tag == *up->keep) {
          bool superseded =
              std::any_of(incoming.begin(), incoming.end(),
                          [&](const Rule& n) { return n.same_content(r); });
          return superseded;
        }
        return true;
      });
      for (auto& r : incoming) insert_rule(st, std::move(r), res);
    }
  }

  QueryReply reply;
  reply.id = st.id;
  reply.neighbors = reported_neighbors;
  std::sort(reply.neighbors.begin(), reply.neighbors.end());
  reply.managers = st.manager_ids();
  reply.rules = st.rules;
  for (auto& r : reply.rules) r.stamp = 0;
  canonicalize(reply.rules);
  res.reply = std::move(reply);
  return res;
}

HopTrace replay(const ForwardingView& view, NodeId src, NodeId dest,
                std::size_t hop_guard) {
  HopTrace t;
  t.hops.push_back(src);
  NodeId cur = src;
  NodeId in = kLocalPort;
  std::set<std::pair<NodeId, NodeId>> seen;
  std::vector<NodeId> operational;
  while (true) {
    if (cur == dest) {
      t.outcome = TraceOutcome::delivered;
      return t;
    }
    if (!seen.insert({cur, in}).second || t.hops.size() > hop_guard) {
      t.outcome = TraceOutcome::loop;
      return t;
    }
    if (!view.is_switch(cur) && cur != src) {
      t.outcome = TraceOutcome::dropped;
      return t;
    }
    operational.clear();
    for (NodeId v : view.ports(cur))
      if (view.link_up(cur, v)) operational.push_back(v);
    Match m = applicable_rule(view.rules_at(cur), src, dest, in, operational);
    t.ambiguous = t.ambiguous || m.ambiguous;
    NodeId next = kNoNode;
    if (m.rule) {
      next = m.rule->fwd;
    } else if (std::find(operational.begin(), operational.end(), dest) !=
               operational.end()) {
      next = dest;
    } else {
      t.outcome = TraceOutcome::dropped;
      return t;
    }
    t.hops.push_back(next);
    in = cur;
    cur = next;
  }
}

}  // namespace renaissance
