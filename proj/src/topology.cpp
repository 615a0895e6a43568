#include "renaissance/topology.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "renaissance/dataplane.hpp"

namespace renaissance {

Graph::Graph(std::uint32_t n_controllers, std::uint32_t n_switches)
    : n_controllers_(n_controllers),
      n_switches_(n_switches),
      present_(n_controllers + n_switches + 1, true),
      adj_(n_controllers + n_switches + 1) {
  present_[0] = false;
}

std::vector<NodeId> Graph::nodes() const {
  std::vector<NodeId> out;
  for (NodeId v = 1; v <= capacity(); ++v)
    if (present_[v]) out.push_back(v);
  return out;
}

std::vector<NodeId> Graph::controllers() const {
  std::vector<NodeId> out;
  for (NodeId v = 1; v <= n_controllers_; ++v)
    if (present_[v]) out.push_back(v);
  return out;
}

std::vector<NodeId> Graph::switches() const {
  std::vector<NodeId> out;
  for (NodeId v = n_controllers_ + 1; v <= capacity(); ++v)
    if (present_[v]) out.push_back(v);
  return out;
}

bool Graph::add_edge(NodeId u, NodeId v) {
  if (!contains(u) || !contains(v) || u == v) return false;
  if (has_edge(u, v)) return false;
  auto ins = [](std::vector<NodeId>& l, NodeId x) {
    l.insert(std::lower_bound(l.begin(), l.end(), x), x);
  };
  ins(adj_[u], v);
  ins(adj_[v], u);
  return true;
}

bool Graph::remove_edge(NodeId u, NodeId v) {
  if (!has_edge(u, v)) return false;
  std::erase(adj_[u], v);
  std::erase(adj_[v], u);
  down_.erase(make_edge(u, v));
  return true;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  if (!in_range(u) || !in_range(v)) return false;
  return std::binary_search(adj_[u].begin(), adj_[u].end(), v);
}

void Graph::add_node(NodeId v) {
  if (in_range(v)) present_[v] = true;
}

void Graph::remove_node(NodeId v) {
  if (!contains(v)) return;
  for (NodeId u : std::vector<NodeId>(adj_[v])) remove_edge(u, v);
  present_[v] = false;
}

void Graph::set_operational(NodeId u, NodeId v, bool up) {
  if (!has_edge(u, v)) return;
  if (up)
    down_.erase(make_edge(u, v));
  else
    down_.insert(make_edge(u, v));
}

bool Graph::operational(NodeId u, NodeId v) const {
  return has_edge(u, v) && !down_.contains(make_edge(u, v));
}

std::vector<NodeId> Graph::operational_neighbors(NodeId v) const {
  std::vector<NodeId> out;
  for (NodeId u : adj_.at(v))
    if (operational(v, u)) out.push_back(u);
  return out;
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  for (NodeId u = 1; u <= capacity(); ++u)
    for (NodeId v : adj_[u])
      if (u < v) out.emplace_back(u, v);
  return out;
}

std::size_t Graph::edge_count() const { return edges().size(); }

namespace {

constexpr std::uint32_t kUnreached = std::numeric_limits<std::uint32_t>::max();

std::vector<std::uint32_t> bfs_dist(const Graph& g, NodeId from) {
  std::vector<std::uint32_t> dist(g.capacity() + 1, kUnreached);
  std::deque<NodeId> q{from};
  dist[from] = 0;
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop_front();
    for (NodeId v : g.neighbors(u)) {
      if (dist[v] != kUnreached || !g.operational(u, v)) continue;
      dist[v] = dist[u] + 1;
      q.push_back(v);
    }
  }
  return dist;
}

}  // namespace

std::uint32_t Graph::diameter() const {
  std::uint32_t d = 0;
  for (NodeId v : nodes()) {
    auto dist = bfs_dist(*this, v);
    for (NodeId u : nodes())
      if (dist[u] != kUnreached) d = std::max(d, dist[u]);
  }
  return d;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool parse_u32(std::string_view s, std::uint32_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace

Graph load_topology(std::string_view text) {
  std::optional<Graph> g;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;

    if (!g) {
      auto sp = line.find_first_of(" \t");
      std::uint32_t nc = 0, ns = 0;
      if (sp == std::string_view::npos || !parse_u32(line.substr(0, sp), nc) ||
          !parse_u32(line.substr(sp + 1), ns))
        throw TopologyError(line_no, "expected header '<n_C> <n_S>'");
      if (nc + ns == 0) throw TopologyError(line_no, "empty network");
      g.emplace(nc, ns);
      continue;
    }
    auto dash = line.find('-');
    std::uint32_t u = 0, v = 0;
    if (dash == std::string_view::npos || !parse_u32(line.substr(0, dash), u) ||
        !parse_u32(line.substr(dash + 1), v))
      throw TopologyError(line_no, "expected edge '<u>-<v>'");
    if (!g->in_range(u) || !g->in_range(v))
      throw TopologyError(line_no, "node index out of range");
    if (u == v) throw TopologyError(line_no, "self loop");
    if (!g->add_edge(u, v))
      throw TopologyError(line_no, "duplicate edge " + std::to_string(u) +
                                       "-" + std::to_string(v));
  }
  if (!g) throw TopologyError(line_no, "missing header");
  return std::move(*g);
}

Graph load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topology file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_topology(ss.str());
}

std::string format_topology(const Graph& g) {
  std::ostringstream os;
  os << g.n_controllers() << " " << g.n_switches() << "\n";
  for (auto [u, v] : g.edges()) os << u << "-" << v << "\n";
  return os.str();
}

namespace {

// Unit-capacity max flow (Edmonds-Karp) on the operational undirected graph
// restricted to `allowed`, stopping at `limit`.
struct UnitFlow {
  const Graph& g;
  std::vector<bool> allowed;
  std::map<std::pair<NodeId, NodeId>, int> flow;  // directed net flow u->v

  UnitFlow(const Graph& graph, std::vector<bool> allow)
      : g(graph), allowed(std::move(allow)) {}

  int residual(NodeId u, NodeId v) const {
    auto it = flow.find({u, v});
    int f = it == flow.end() ? 0 : it->second;
    return 1 - f;
  }

  bool augment(NodeId s, NodeId t) {
    std::vector<NodeId> parent(g.capacity() + 1, kNoNode);
    std::deque<NodeId> q{s};
    parent[s] = s;
    while (!q.empty() && parent[t] == kNoNode) {
      NodeId u = q.front();
      q.pop_front();
      for (NodeId v : g.neighbors(u)) {
        if (!allowed[v] || parent[v] != kNoNode || !g.operational(u, v))
          continue;
        if (residual(u, v) <= 0) continue;
        parent[v] = u;
        q.push_back(v);
      }
    }
    if (parent[t] == kNoNode) return false;
    for (NodeId v = t; v != s; v = parent[v]) {
      NodeId u = parent[v];
      flow[{u, v}] += 1;
      flow[{v, u}] -= 1;
    }
    return true;
  }

  int run(NodeId s, NodeId t, int limit) {
    int f = 0;
    while (f < limit && augment(s, t)) ++f;
    return f;
  }
};

std::vector<bool> all_present(const Graph& g) {
  std::vector<bool> a(g.capacity() + 1, false);
  for (NodeId v : g.nodes()) a[v] = true;
  return a;
}

std::vector<bool> relay_allowed(const Graph& g, NodeId a, NodeId b) {
  std::vector<bool> allow(g.capacity() + 1, false);
  for (NodeId v : g.switches()) allow[v] = true;
  allow[a] = allow[b] = true;
  return allow;
}

struct PathQuery {
  RelayPolicy relay = RelayPolicy::any;
  const std::set<Edge>* banned_edges = nullptr;
  const std::vector<bool>* banned_nodes = nullptr;
};

std::optional<std::vector<NodeId>> bfs_path(const Graph& g, NodeId x,
                                            NodeId y, const PathQuery& q) {
  if (!g.contains(x) || !g.contains(y) || x == y) return std::nullopt;
  auto usable = [&](NodeId u, NodeId v) {
    if (!g.operational(u, v)) return false;
    if (q.banned_edges && q.banned_edges->contains(make_edge(u, v)))
      return false;
    return true;
  };
  auto relayable = [&](NodeId v) {
    if (q.relay == RelayPolicy::switches_only && !g.is_switch(v)) return false;
    if (q.banned_nodes && (*q.banned_nodes)[v]) return false;
    return true;
  };
  // Distances toward y; only relayable nodes are expanded.
  std::vector<std::uint32_t> dist(g.capacity() + 1, kUnreached);
  std::deque<NodeId> dq{y};
  dist[y] = 0;
  while (!dq.empty()) {
    NodeId u = dq.front();
    dq.pop_front();
    for (NodeId v : g.neighbors(u)) {
      if (dist[v] != kUnreached || !usable(u, v)) continue;
      if (v != x && !relayable(v)) continue;
      dist[v] = dist[u] + 1;
      if (v != x) dq.push_back(v);
    }
  }
  if (dist[x] == kUnreached) return std::nullopt;
  std::vector<NodeId> path{x};
  NodeId u = x;
  while (u != y) {
    NodeId next = kNoNode;
    for (NodeId v : g.neighbors(u)) {
      if (dist[v] == kUnreached || dist[v] + 1 != dist[u] || !usable(u, v))
        continue;
      if (v != y && !relayable(v)) continue;
      next = v;
      break;  // neighbors are sorted, first hit is the minimum index
    }
    path.push_back(next);
    u = next;
  }
  return path;
}

std::vector<NodeId> strip_cycles(const std::vector<NodeId>& walk) {
  std::vector<NodeId> out;
  for (NodeId v : walk) {
    auto it = std::find(out.begin(), out.end(), v);
    if (it != out.end())
      out.erase(it + 1, out.end());
    else
      out.push_back(v);
  }
  return out;
}

std::optional<FlowPaths> disjoint_pair_by_flow(const Graph& g, NodeId c,
                                               NodeId x) {
  UnitFlow uf(g, relay_allowed(g, c, x));
  if (uf.run(c, x, 2) < 2) return std::nullopt;
  std::set<std::pair<NodeId, NodeId>> used;
  for (auto& [e, f] : uf.flow)
    if (f > 0) used.insert(e);
  std::vector<std::vector<NodeId>> paths;
  for (int k = 0; k < 2; ++k) {
    std::vector<NodeId> walk{c};
    NodeId u = c;
    while (u != x) {
      auto it = std::find_if(used.begin(), used.end(),
                             [&](const auto& e) { return e.first == u; });
      if (it == used.end()) return std::nullopt;
      u = it->second;
      used.erase(it);
      walk.push_back(u);
    }
    paths.push_back(strip_cycles(walk));
  }
  std::sort(paths.begin(), paths.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  return FlowPaths{paths[0], paths[1]};
}

}  // namespace

std::uint32_t edge_connectivity(const Graph& g) {
  auto ns = g.nodes();
  if (ns.size() < 2) return 0;
  std::uint32_t best = kUnreached;
  for (std::size_t i = 1; i < ns.size(); ++i) {
    UnitFlow uf(g, all_present(g));
    int limit = static_cast<int>(g.neighbors(ns[0]).size());
    auto f = static_cast<std::uint32_t>(uf.run(ns[0], ns[i], limit));
    best = std::min(best, f);
    if (best == 0) break;
  }
  return best;
}

std::optional<std::vector<NodeId>> first_shortest_path(const Graph& g,
                                                       NodeId x, NodeId y,
                                                       RelayPolicy relay) {
  PathQuery q;
  q.relay = relay;
  return bfs_path(g, x, y, q);
}

std::optional<FlowPaths> flow_paths(const Graph& g, NodeId c, NodeId x,
                                    std::uint32_t kappa) {
  auto primary = first_shortest_path(g, c, x, RelayPolicy::switches_only);
  if (!primary) return std::nullopt;
  FlowPaths fp{*primary, {}};
  if (kappa == 0) return fp;

  std::set<Edge> p1_edges;
  for (std::size_t i = 0; i + 1 < fp.primary.size(); ++i)
    p1_edges.insert(make_edge(fp.primary[i], fp.primary[i + 1]));
  std::vector<bool> p1_interior(g.capacity() + 1, false);
  for (std::size_t i = 1; i + 1 < fp.primary.size(); ++i)
    p1_interior[fp.primary[i]] = true;

  PathQuery q;
  q.relay = RelayPolicy::switches_only;
  q.banned_edges = &p1_edges;
  q.banned_nodes = &p1_interior;
  if (auto b = bfs_path(g, c, x, q)) {
    fp.backup = *b;
    return fp;
  }
  q.banned_nodes = nullptr;
  if (auto b = bfs_path(g, c, x, q)) {
    fp.backup = *b;
    return fp;
  }
  if (auto pair = disjoint_pair_by_flow(g, c, x)) return pair;
  return fp;
}

FlowAssignment synthesize_flows(const Graph& g, NodeId controller,
                                const Tag& tag, std::uint32_t kappa,
                                int n_prt) {
  FlowAssignment out;
  if (!g.contains(controller)) return out;
  const int hi = n_prt;
  const int lo = n_prt - 1;
  auto emit = [&](NodeId at, NodeId dest, NodeId in, int prt, NodeId fwd) {
    Rule r;
    r.creator = controller;
    r.sw = at;
    r.src = controller;
    r.dest = dest;
    r.in_port = in;
    r.priority = prt;
    r.fwd = fwd;
    r.tag = tag;
    out[at].push_back(r);
  };
  for (NodeId x : g.nodes()) {
    if (x == controller) continue;
    auto fp = flow_paths(g, controller, x, kappa);
    if (!fp) continue;
    const auto& p1 = fp->primary;
    const bool protect = !fp->backup.empty() && lo >= 1;
    emit(controller, x, kLocalPort, hi, p1[1]);
    if (protect) emit(controller, x, kAnyPort, lo, fp->backup[1]);
    for (std::size_t i = 1; i + 1 < p1.size(); ++i) {
      emit(p1[i], x, p1[i - 1], hi, p1[i + 1]);
      if (protect) emit(p1[i], x, kAnyPort, lo, p1[i - 1]);
    }
    if (protect) {
      const auto& p2 = fp->backup;
      for (std::size_t j = 1; j + 1 < p2.size(); ++j)
        emit(p2[j], x, p2[j - 1], hi, p2[j + 1]);
    }
  }
  for (auto& [_, rules] : out) canonicalize(rules);
  return out;
}

std::vector<Rule> my_rules(const Graph& g, NodeId controller, NodeId node,
                           const Tag& tag, std::uint32_t kappa, int n_prt) {
  auto all = synthesize_flows(g, controller, tag, kappa, n_prt);
  auto it = all.find(node);
  return it == all.end() ? std::vector<Rule>{} : std::move(it->second);
}

std::map<NodeId, FlowAssignment> synthesize_all(const Graph& g,
                                                std::uint32_t kappa,
                                                int n_prt) {
  std::map<NodeId, FlowAssignment> out;
  for (NodeId c : g.controllers())
    out[c] = synthesize_flows(g, c, Tag{c, 1}, kappa, n_prt);
  return out;
}

std::size_t rule_bound(std::uint32_t n_controllers, std::uint32_t n_switches,
                       int n_prt) {
  return static_cast<std::size_t>(n_controllers) *
         (n_controllers + n_switches - 1) * static_cast<std::size_t>(n_prt);
}

std::string to_string(const ResilienceFailure& f) {
  std::ostringstream os;
  os << "controller " << f.controller << " -> " << f.dest << " failed={";
  for (std::size_t i = 0; i < f.failed.size(); ++i)
    os << (i ? "," : "") << f.failed[i].first << "-" << f.failed[i].second;
  os << "} ";
  switch (f.reason) {
    case DeliveryFailure::dropped: os << "dropped"; break;
    case DeliveryFailure::loop: os << "loop"; break;
    case DeliveryFailure::ambiguous: os << "ambiguous"; break;
  }
  os << " at " << f.at;
  return os.str();
}

namespace {

class AssignmentView : public ForwardingView {
 public:
  AssignmentView(const Graph& g,
                 const std::map<NodeId, FlowAssignment>& assignment)
      : g_(g) {
    for (const auto& [c, fa] : assignment)
      for (const auto& [node, rules] : fa)
        tables_[node].insert(tables_[node].end(), rules.begin(), rules.end());
  }
  void set_failed(const std::set<Edge>* failed) { failed_ = failed; }

  std::span<const Rule> rules_at(NodeId node) const override {
    auto it = tables_.find(node);
    if (it == tables_.end()) return {};
    return it->second;
  }
  bool link_up(NodeId u, NodeId v) const override {
    return g_.operational(u, v) &&
           !(failed_ && failed_->contains(make_edge(u, v)));
  }
  const std::vector<NodeId>& ports(NodeId node) const override {
    return g_.neighbors(node);
  }
  bool is_switch(NodeId node) const override { return g_.is_switch(node); }

 private:
  const Graph& g_;
  std::map<NodeId, std::vector<Rule>> tables_;
  const std::set<Edge>* failed_ = nullptr;
};

}  // namespace

ResilienceReport verify_resilience(
    const Graph& g, const std::map<NodeId, FlowAssignment>& assignment,
    std::uint32_t kappa, std::size_t max_failures) {
  ResilienceReport rep;
  AssignmentView view(g, assignment);

  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (const auto& [c, _] : assignment) {
    if (!g.contains(c)) continue;
    for (NodeId x : g.nodes())
      if (x != c && first_shortest_path(g, c, x, RelayPolicy::switches_only))
        pairs.emplace_back(c, x);
  }
  rep.pairs = pairs.size();

  std::vector<Edge> edges;
  for (auto e : g.edges())
    if (g.operational(e.first, e.second)) edges.push_back(e);

  std::set<Edge> failed;
  const std::size_t guard = 4 * (g.capacity() + 1);
  auto check = [&]() {
    ++rep.failure_sets;
    view.set_failed(&failed);
    for (auto [c, x] : pairs) {
      ++rep.deliveries_checked;
      HopTrace t = replay(view, c, x, guard);
      if (t.outcome == TraceOutcome::delivered && !t.ambiguous) continue;
      rep.pass = false;
      if (rep.failures.size() >= max_failures) continue;
      ResilienceFailure f;
      f.controller = c;
      f.dest = x;
      f.failed.assign(failed.begin(), failed.end());
      f.at = t.hops.back();
      f.reason = t.ambiguous ? DeliveryFailure::ambiguous
                 : t.outcome == TraceOutcome::loop ? DeliveryFailure::loop
                                                   : DeliveryFailure::dropped;
      rep.failures.push_back(std::move(f));
    }
  };
  std::function<void(std::size_t, std::uint32_t)> enumerate =
      [&](std::size_t start, std::uint32_t left) {
        check();
        if (left == 0) return;
        for (std::size_t i = start; i < edges.size(); ++i) {
          failed.insert(edges[i]);
          enumerate(i + 1, left - 1);
          failed.erase(edges[i]);
        }
      };
  enumerate(0, kappa);
  return rep;
}

}  // namespace renaissance
