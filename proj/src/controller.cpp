#include "renaissance/controller.hpp"

#include <algorithm>
#include <deque>

namespace renaissance {

ControllerState make_controller(NodeId id, const ControllerConfig& cfg) {
  ControllerState s;
  s.id = id;
  s.cfg = cfg;
  s.prev_tag = Tag{id, 0};
  s.before_prev_tag = Tag{id, 0};
  s.epoch = 1;
  s.curr_tag = Tag{id, 1};
  return s;
}

Tag next_tag(ControllerState& s) {
  Tag t;
  do {
    t = Tag{s.id, ++s.epoch};
  } while (t == s.curr_tag || t == s.prev_tag ||
           (s.cfg.three_tag && t == s.before_prev_tag));
  return t;
}

ViewGraph graph_of(const std::vector<QueryReply>& replies) {
  ViewGraph g;
  for (const auto& m : replies) {
    g.nodes.insert(m.id);
    auto& out = g.out[m.id];
    for (NodeId v : m.neighbors) {
      g.nodes.insert(v);
      out.insert(v);
    }
  }
  return g;
}

std::set<NodeId> reachable(const ViewGraph& g, NodeId from) {
  std::set<NodeId> seen{from};
  std::deque<NodeId> q{from};
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop_front();
    auto it = g.out.find(u);
    if (it == g.out.end()) continue;
    for (NodeId v : it->second)
      if (seen.insert(v).second) q.push_back(v);
  }
  return seen;
}

Graph to_topology(const ViewGraph& g, std::uint32_t n_controllers,
                  std::uint32_t n_switches, const std::set<NodeId>& fresh) {
  Graph t(n_controllers, n_switches);
  for (const auto& [u, outs] : g.out) {
    if (!t.in_range(u)) continue;
    for (NodeId v : outs) {
      if (!t.in_range(v) || u == v || t.has_edge(u, v)) continue;
      auto back = g.out.find(v);
      bool overrule = fresh.contains(u) && !fresh.contains(v);
      if (back != g.out.end() && !back->second.contains(u) && !overrule)
        continue;
      t.add_edge(u, v);
    }
  }
  return t;
}

bool tagged(const QueryReply& m, NodeId i, const Tag& x) {
  bool any = false;
  for (const auto& r : m.rules) {
    if (r.creator != i || !r.is_meta()) continue;
    if (r.tag != x) return false;
    any = true;
  }
  return any;
}

namespace {

void sort_by_id(std::vector<QueryReply>& v) {
  std::stable_sort(v.begin(), v.end(),
                   [](const QueryReply& a, const QueryReply& b) {
                     return a.id < b.id;
                   });
}

bool is_switch_id(const ControllerConfig& cfg, NodeId v) {
  return v > cfg.n_controllers && v <= cfg.n_controllers + cfg.n_switches;
}

}  // namespace

std::vector<QueryReply> res(const ControllerState& s, const Tag& x,
                            const std::vector<NodeId>& nc) {
  std::vector<QueryReply> out;
  for (const auto& m : s.reply_db)
    if (m.id != s.id && tagged(m, s.id, x)) out.push_back(m);
  out.push_back(self_record(s.id, nc));
  sort_by_id(out);
  return out;
}

std::vector<QueryReply> fusion(const ControllerState& s,
                               const std::vector<NodeId>& nc) {
  auto out = res(s, s.curr_tag, nc);
  std::set<NodeId> ids;
  for (const auto& m : out) ids.insert(m.id);
  for (auto& m : res(s, s.prev_tag, nc))
    if (!ids.contains(m.id)) out.push_back(std::move(m));
  sort_by_id(out);
  return out;
}

IterationResult iterate(ControllerState& s, const std::vector<NodeId>& nc) {
  IterationResult result;
  const NodeId i = s.id;
  const bool three = s.cfg.three_tag;

  // Remove replies from unreachable senders. Reachability is over the fused
  // view: a prev reply downstream of an already refreshed node stays.
  {
    std::set<NodeId> reach_all = reachable(graph_of(fusion(s, nc)), i);
    std::vector<QueryReply> kept;
    std::set<NodeId> seen;
    // Walk newest first so a corrupted duplicate never shadows a fresh reply.
    for (auto it = s.reply_db.rbegin(); it != s.reply_db.rend(); ++it) {
      auto& m = *it;
      if (m.id == i || seen.contains(m.id)) continue;
      bool keep = (tagged(m, i, s.curr_tag) || tagged(m, i, s.prev_tag)) &&
                  reach_all.contains(m.id);
      if (!keep) continue;
      seen.insert(m.id);
      kept.push_back(std::move(m));
    }
    std::reverse(kept.begin(), kept.end());
    kept.push_back(self_record(i, nc));
    s.reply_db = std::move(kept);
  }

  // Round completion: every node reachable in G(res(currTag)) replied.
  {
    auto cur = res(s, s.curr_tag, nc);
    std::set<NodeId> have;
    for (const auto& m : cur) have.insert(m.id);
    auto reach = reachable(graph_of(cur), i);
    if (std::includes(have.begin(), have.end(), reach.begin(), reach.end())) {
      result.new_round = true;
      s.before_prev_tag = s.prev_tag;
      s.prev_tag = s.curr_tag;
      s.curr_tag = next_tag(s);
      std::erase_if(s.reply_db, [&](const QueryReply& m) {
        return m.id != i && tagged(m, i, s.curr_tag);
      });
      ++s.rounds;
    }
  }

  auto fus = fusion(s, nc);
  auto prev_set = res(s, s.prev_tag, nc);
  ViewGraph g_fus = graph_of(fus);
  result.refer_tag = g_fus == graph_of(prev_set) ? s.prev_tag : s.curr_tag;

  // Replies replace each other by id, so res(currTag) alone is a partial
  // picture mid-round. The fused view is the newest reply per node.
  const auto& refer_set = fus;
  std::set<NodeId> fresh;
  for (const auto& m : res(s, s.curr_tag, nc)) fresh.insert(m.id);
  Graph topo = to_topology(graph_of(refer_set), s.cfg.n_controllers,
                           s.cfg.n_switches, fresh);
  FlowAssignment flows =
      synthesize_flows(topo, i, s.curr_tag, s.cfg.kappa, s.cfg.n_prt);
  if (result.new_round) {
    std::set<NodeId> prev_reach = reachable(graph_of(prev_set), i);
    s.unreachable.clear();
    for (NodeId k = 1; k <= s.cfg.n_controllers; ++k)
      if (k != i && !prev_reach.contains(k)) s.unreachable.insert(k);
  }

  std::map<NodeId, std::vector<Command>> msg;
  for (const auto& m : refer_set) {
    if (m.id == i || !m.managers || !is_switch_id(s.cfg, m.id)) continue;
    std::set<NodeId> creators;
    for (const auto& r : m.rules) creators.insert(r.creator);
    // Who to remove is decided when a round starts, against the round just
    // completed, and repeated until the next start. Acting on every snapshot
    // lets stale replies feed each other. A controller we now have a flow to
    // is kept even if the completed round missed it.
    std::set<NodeId> M{i};
    std::set<NodeId> known(m.managers->begin(), m.managers->end());
    known.insert(creators.begin(), creators.end());
    for (NodeId k : known)
      if (k >= 1 && k <= s.cfg.n_controllers &&
          (!s.unreachable.contains(k) || flows.contains(k)))
        M.insert(k);

    auto& cmds = msg[m.id];
    if (s.cfg.memory_adaptive) {
      std::set<NodeId> mngs(m.managers->begin(), m.managers->end());
      for (NodeId k : mngs)
        if (!M.contains(k)) cmds.push_back(cmd::DelMngr{k});
    }
    cmds.push_back(cmd::AddMngr{i});
    if (s.cfg.memory_adaptive)
      for (NodeId k : creators)
        if (!M.contains(k)) cmds.push_back(cmd::DelAllRules{k});
    cmd::UpdateRules up;
    if (auto it = flows.find(m.id); it != flows.end()) up.rules = it->second;
    if (three) up.keep = s.prev_tag;
    cmds.push_back(std::move(up));
  }

  auto it_src = flows.find(i);
  s.source_table = it_src == flows.end() ? std::vector<Rule>{} : it_src->second;

  for (NodeId k : reachable(g_fus, i)) {
    if (k == i) continue;
    Outbound o;
    o.dest = k;
    o.batch.push_back(cmd::NewRound{s.curr_tag});
    if (auto it = msg.find(k); it != msg.end())
      o.batch.insert(o.batch.end(), it->second.begin(), it->second.end());
    o.batch.push_back(cmd::Query{s.curr_tag});
    result.batches.push_back(std::move(o));
  }
  return result;
}

bool on_reply(ControllerState& s, const QueryReply& m,
              const std::vector<NodeId>& nc) {
  const NodeId i = s.id;
  const std::size_t cap = s.cfg.reply_capacity();
  if (m.id == i) return false;
  bool reset = false;
  bool present = std::find(s.reply_db.begin(), s.reply_db.end(), m) !=
                 s.reply_db.end();
  if (s.cfg.memory_adaptive && s.reply_db.size() + (present ? 0 : 1) > cap) {
    s.reply_db.clear();
    s.reply_db.push_back(self_record(i, nc));
    ++s.c_resets;
    reset = true;
  }
  if (!tagged(m, i, s.curr_tag)) return reset;
  std::erase_if(s.reply_db, [&](const QueryReply& r) { return r.id == m.id; });
  s.reply_db.push_back(m);
  while (s.reply_db.size() > cap) {
    auto it = std::find_if(s.reply_db.begin(), s.reply_db.end(),
                           [&](const QueryReply& r) { return r.id != i; });
    s.reply_db.erase(it);
  }
  return reset;
}

QueryReply on_query(const ControllerState& s, NodeId from, const Tag& tag,
                    const std::vector<NodeId>& nc) {
  QueryReply q;
  q.id = s.id;
  q.neighbors = nc;
  std::sort(q.neighbors.begin(), q.neighbors.end());
  q.rules.push_back(make_meta_rule(from, s.id, tag));
  return q;
}

void corrupt_controller(ControllerState& s, std::mt19937_64& rng) {
  const std::uint32_t n = s.cfg.n_controllers + s.cfg.n_switches;
  std::uniform_int_distribution<NodeId> node(1, std::max<NodeId>(n, 1));
  std::uniform_int_distribution<NodeId> ctrl(1, std::max<NodeId>(s.cfg.n_controllers, 1));
  std::uniform_int_distribution<std::uint64_t> small(0, 6);
  std::bernoulli_distribution coin(0.5);
  auto tag = [&]() { return Tag{ctrl(rng), small(rng)}; };

  s.epoch = small(rng);
  s.curr_tag = coin(rng) ? Tag{s.id, small(rng)} : tag();
  s.prev_tag = coin(rng) ? Tag{s.id, small(rng)} : tag();
  s.before_prev_tag = tag();
  s.unreachable.clear();
  for (NodeId k = 1; k <= s.cfg.n_controllers; ++k)
    if (coin(rng)) s.unreachable.insert(k);

  s.reply_db.clear();
  std::size_t count = std::uniform_int_distribution<std::size_t>(
      0, s.cfg.reply_capacity())(rng);
  for (std::size_t k = 0; k < count; ++k) {
    QueryReply m;
    m.id = node(rng);
    for (int e = static_cast<int>(small(rng)) % 4; e > 0; --e)
      m.neighbors.push_back(node(rng));
    std::sort(m.neighbors.begin(), m.neighbors.end());
    m.neighbors.erase(std::unique(m.neighbors.begin(), m.neighbors.end()),
                      m.neighbors.end());
    if (coin(rng)) {
      std::vector<NodeId> mg;
      for (int e = static_cast<int>(small(rng)) % 3; e > 0; --e)
        mg.push_back(ctrl(rng));
      std::sort(mg.begin(), mg.end());
      mg.erase(std::unique(mg.begin(), mg.end()), mg.end());
      m.managers = mg;
    }
    Tag shared = coin(rng) ? s.curr_tag : coin(rng) ? s.prev_tag : tag();
    for (int e = static_cast<int>(small(rng)) % 4; e > 0; --e) {
      Rule r;
      r.creator = coin(rng) ? s.id : ctrl(rng);
      r.sw = m.id;
      if (coin(rng)) {
        r.src = r.creator;
        r.dest = node(rng);
        r.priority = static_cast<int>(small(rng) % 3) + 1;
        r.fwd = node(rng);
      }
      r.tag = coin(rng) ? shared : tag();
      m.rules.push_back(r);
    }
    canonicalize(m.rules);
    s.reply_db.push_back(std::move(m));
  }
}

}  // namespace renaissance
