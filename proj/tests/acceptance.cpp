// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "renaissance/cli.hpp"
#include "renaissance/engine.hpp"
#include "support/channel_harness.hpp"

using namespace renaissance;
namespace fs = std::filesystem;

namespace {

const std::string kData = RENAISSANCE_TEST_DATA;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::cout << "criterion " << n << ": " << (ok ? "PASS" : "FAIL") << "  "
            << detail << std::endl;
  if (!ok) ++failures;
}

EngineConfig engine(const Graph& g, std::uint64_t seed) {
  EngineConfig ec;
  ec.graph = g;
  ec.kappa = 1;
  ec.seed = seed;
  return ec;
}

bool settle(World& w, std::uint64_t max_steps = 200000) {
  int streak = 0;
  while (w.steps() < max_steps) {
    w.step();
    if (!w.frame_closed()) continue;
    streak = w.check_legitimacy().legitimate() ? streak + 1 : 0;
    if (streak == 2) return true;
  }
  return false;
}

std::uint32_t bootstrap_bound(std::uint32_t d) {
  return ((kDeltaComm + kDeltaSynch) + 2) * d + 1;
}

std::uint64_t deletion_bound(const Graph& g) {
  return ((kDeltaComm + kDeltaSynch) * g.diameter() + 1) * g.switches().size();
}

// Memory checks shared by several criteria; samples only legitimate states.
struct MemoryAudit {
  std::size_t worst_rules = 0, worst_db = 0;
  bool rules_ok = true, db_ok = true, managers_ok = true;
  std::size_t samples = 0;

  void sample(const World& w) {
    const Graph& g = w.graph();
    const std::size_t rb = rule_bound(g.n_controllers(), g.n_switches(),
                                      default_n_prt(w.config().kappa));
    const std::size_t db = 2 * (g.n_controllers() + g.n_switches());
    ++samples;
    worst_rules = std::max(worst_rules, w.max_data_rules());
    worst_db = std::max(worst_db, w.max_reply_db());
    rules_ok = rules_ok && w.max_data_rules() <= rb;
    db_ok = db_ok && w.max_reply_db() <= db;
    const std::size_t live = w.live_controllers().size();
    for (const auto& [_, s] : w.switches())
      managers_ok = managers_ok && s.manager_ids().size() == live;
  }
};

MemoryAudit memory;

// ---- 1 ------------------------------------------------------------------

void bootstrap() {
  auto t0 = Clock::now();
  Graph g = load_topology_file(kData + "/b4.topo");
  World w(engine(g, 1));
  bool ok = settle(w);
  memory.sample(w);
  const auto bound = bootstrap_bound(g.diameter());
  double secs = seconds_since(t0);
  std::ostringstream os;
  os << "B4 nodes=" << g.nodes().size() << " D=" << g.diameter()
     << " controllers=" << g.n_controllers() << " frames=" << w.frames()
     << " bound=" << bound << " time=" << secs << "s";
  report(1, ok && w.frames() <= bound && secs < 10.0, os.str());
}

// ---- 2 ------------------------------------------------------------------

void corruption_sweep() {
  auto t0 = Clock::now();
  Graph g = load_topology_file(kData + "/ring8.topo");
  const auto del_bound = deletion_bound(g);
  int converged = 0;
  std::uint64_t worst_resets = 0, worst_del = 0, worst_frames = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Scenario sc;
    sc.engine = engine(g, seed);
    FaultSpec f;
    f.kind = FaultKind::corrupt_state;
    f.scope = kCorruptAll;
    f.seed = 1000 + seed;
    f.at_step = 0;
    sc.faults.push_back(f);
    RunMetrics m = run_scenario(sc);
    converged += m.converged;
    for (auto [_, n] : m.c_resets) worst_resets = std::max(worst_resets, n);
    worst_del = std::max(worst_del, m.illegit_deletions);
    worst_frames = std::max(worst_frames, m.frames_to_legit);
    // Memory over the legitimate samples of this run.
    const std::size_t rb = rule_bound(g.n_controllers(), g.n_switches(), 2);
    memory.rules_ok = memory.rules_ok && m.max_rules_per_switch <= rb;
    memory.db_ok = memory.db_ok &&
                   m.max_reply_db <= 2 * (g.n_controllers() + g.n_switches());
    memory.worst_rules = std::max(memory.worst_rules, m.max_rules_per_switch);
    memory.worst_db = std::max(memory.worst_db, m.max_reply_db);
  }
  double secs = seconds_since(t0);
  std::ostringstream os;
  os << "ring-8 converged=" << converged << "/100 max_c_resets=" << worst_resets
     << " max_illegit_deletions=" << worst_del << " bound=" << del_bound
     << " max_frames=" << worst_frames << " time=" << secs << "s";
  report(2, converged == 100 && worst_resets <= 1 && worst_del <= del_bound &&
                secs < 120.0,
         os.str());
}

// ---- 3 ------------------------------------------------------------------

void link_failure() {
  Graph g = load_topology_file(kData + "/b4.topo");
  const std::uint32_t d = g.diameter();
  bool ok = true;
  std::ostringstream os;
  std::uint64_t worst_frames = 0, lost = 0, stuck = 0;
  std::set<Edge> tried;
  // A primary-path link from every controller to its farthest switch.
  for (NodeId c : g.controllers()) {
    NodeId far = kNoNode;
    std::size_t len = 0;
    for (NodeId x : g.switches()) {
      auto p = flow_paths(g, c, x, 1);
      if (p && p->primary.size() > len) {
        len = p->primary.size();
        far = x;
      }
    }
    auto p = flow_paths(g, c, far, 1);
    Edge e = make_edge(p->primary[1], p->primary[2]);
    if (!tried.insert(e).second) continue;

    World w(engine(g, 10 + c));
    if (!settle(w)) {
      ok = false;
      continue;
    }
    // Tokens in flight at the moment of the failure.
    std::map<std::pair<NodeId, NodeId>, std::uint64_t> pending_ex;
    std::uint64_t dropped0 = w.dropped_pending(), false0 = w.false_acks();
    for (const auto& [k, ch] : w.channels())
      if (ch.in_flight) pending_ex[k] = ch.exchanges;
    FaultSpec f;
    f.kind = FaultKind::remove_link;
    f.a = e.first;
    f.b = e.second;
    w.inject(f);
    w.reset_frames();
    bool back = settle(w);
    memory.sample(w);
    // Frames until the first of the two legitimate samples.
    std::uint64_t frames = w.frames() - 1;
    worst_frames = std::max(worst_frames, frames);
    lost += (w.dropped_pending() - dropped0) + (w.false_acks() - false0);
    for (const auto& [k, ex] : pending_ex)
      if (w.channels().at(k).exchanges <= ex) ++stuck;
    ok = ok && back && frames <= 2 * d + 1;
    os << "removed " << e.first << "-" << e.second << " frames=" << frames << "; ";
  }
  os << "bound=" << 2 * d + 1 << " lost_payloads=" << lost
     << " unfinished_round_trips=" << stuck;
  report(3, ok && lost == 0 && stuck == 0 && !tried.empty(), os.str());
}

// ---- 4 ------------------------------------------------------------------

bool stores(const World& w, NodeId k) {
  for (const auto& [_, s] : w.switches()) {
    for (NodeId m : s.manager_ids())
      if (m == k) return true;
    for (const auto& r : s.rules)
      if (r.creator == k) return true;
  }
  return false;
}

void fail_stop() {
  Graph g = load_topology_file(kData + "/b4.topo");
  bool ok = true;
  std::ostringstream os;
  std::uint64_t worst = 0;
  for (NodeId k : g.controllers()) {
    World w(engine(g, 20 + k));
    if (!settle(w)) {
      ok = false;
      continue;
    }
    FaultSpec f;
    f.kind = FaultKind::fail_stop_controller;
    f.a = k;
    w.inject(f);
    w.reset_frames();
    auto survivors = w.live_controllers();

    // Detection: every neighbor of k has flagged it.
    auto detected = [&]() {
      for (NodeId u : g.neighbors(k))
        if (w.alive(u) && !w.detector(u).failed.contains(k)) return false;
      return true;
    };
    const std::uint64_t limit = w.steps() + 200000;
    while (!detected() && w.steps() < limit) w.step();
    // Next round boundary of every survivor.
    std::map<NodeId, std::uint64_t> rounds;
    for (NodeId i : survivors) rounds[i] = w.controllers().at(i).rounds;
    auto all_rotated = [&]() {
      for (NodeId i : survivors)
        if (w.controllers().at(i).rounds == rounds[i]) return false;
      return true;
    };
    while (!all_rotated() && w.steps() < limit) w.step();
    const std::uint64_t boundary = w.frames();
    while (stores(w, k) && w.steps() < limit) w.step();
    std::uint64_t after = w.frames() - boundary;
    worst = std::max(worst, after);
    bool purged = !stores(w, k);
    bool legit = settle(w);
    memory.sample(w);
    ok = ok && purged && legit && after <= 2;
    os << "k=" << k << " frames_after_boundary=" << after << "; ";
  }
  os << "bound=2";
  report(4, ok, os.str());
}

// ---- 5 ------------------------------------------------------------------

void memory_bounds() {
  // Non-adaptive mode keeps foreign rules, so the manager count is only
  // checked in the default (adaptive) runs collected above.
  std::ostringstream os;
  os << "legit_samples=" << memory.samples << " max_rules=" << memory.worst_rules
     << " max_replydb=" << memory.worst_db
     << " managers_equal_live=" << (memory.managers_ok ? "yes" : "no");
  report(5, memory.rules_ok && memory.db_ok && memory.managers_ok &&
                memory.samples > 0,
         os.str());
}

// ---- 6 ------------------------------------------------------------------

// Independent shortest path: distances to y with switch-only relays, then
// the smallest-id neighbor one step closer at every hop.
std::vector<NodeId> oracle_path(const Graph& g, NodeId x, NodeId y) {
  std::map<NodeId, std::uint32_t> dist{{y, 0}};
  std::deque<NodeId> q{y};
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop_front();
    if (u != y && !g.is_switch(u)) continue;
    for (NodeId v : g.neighbors(u))
      if (!dist.contains(v)) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  if (!dist.contains(x)) return {};
  std::vector<NodeId> path{x};
  while (path.back() != y) {
    NodeId cur = path.back(), best = kNoNode;
    for (NodeId v : g.neighbors(cur))
      if (dist.contains(v) && dist[v] + 1 == dist[cur] &&
          (v == y || g.is_switch(v)) && (best == kNoNode || v < best))
        best = v;
    path.push_back(best);
  }
  return path;
}

class TableView : public ForwardingView {
 public:
  TableView(const Graph& g, const FlowAssignment& a) : g_(g), a_(a) {}
  std::span<const Rule> rules_at(NodeId n) const override {
    auto it = a_.find(n);
    if (it == a_.end()) return {};
    return it->second;
  }
  bool link_up(NodeId u, NodeId v) const override { return g_.has_edge(u, v); }
  const std::vector<NodeId>& ports(NodeId n) const override {
    return g_.neighbors(n);
  }
  bool is_switch(NodeId n) const override { return g_.is_switch(n); }

 private:
  const Graph& g_;
  const FlowAssignment& a_;
};

void resilience_matrix() {
  std::vector<std::pair<std::string, Graph>> matrix;
  matrix.emplace_back("ring", generate_topology("ring", {{"n", "8"}}));
  matrix.emplace_back("grid", generate_topology("grid", {{"rows", "3"}, {"cols", "3"}}));
  matrix.emplace_back("clos-lite",
                      generate_topology("clos-lite", {{"spine", "2"}, {"leaf", "4"}}));
  for (int s = 1; s <= 10; ++s)
    matrix.emplace_back(
        "random" + std::to_string(s),
        generate_topology("random", {{"n", "10"}, {"k", "2"}, {"seed", std::to_string(s)}}));

  bool ok = true;
  std::size_t pairs = 0, graphs = 0;
  std::string first_bad;
  for (const auto& [name, g] : matrix) {
    if (edge_connectivity(g) < 2) continue;
    ++graphs;
    auto rep = verify_resilience(g, synthesize_all(g, 1, default_n_prt(1)), 1);
    if (!rep.pass) {
      ok = false;
      if (first_bad.empty()) first_bad = name + " kappa=1";
    }
    for (NodeId c : g.controllers()) {
      auto flows = synthesize_flows(g, c, Tag{c, 1}, 0, default_n_prt(0));
      TableView view(g, flows);
      for (NodeId x : g.nodes()) {
        if (x == c) continue;
        ++pairs;
        auto want = oracle_path(g, c, x);
        auto lib = first_shortest_path(g, c, x, RelayPolicy::switches_only);
        auto hops = replay(view, c, x, 4 * g.capacity()).hops;
        if (!lib || *lib != want || hops != want) {
          ok = false;
          if (first_bad.empty())
            first_bad = name + " kappa=0 " + std::to_string(c) + "->" + std::to_string(x);
        }
      }
    }
  }
  std::ostringstream os;
  os << "graphs=" << graphs << "/" << matrix.size() << " kappa0_pairs=" << pairs;
  if (!first_bad.empty()) os << " first_failure=" << first_bad;
  report(6, ok && graphs == matrix.size(), os.str());
}

// ---- 7 ------------------------------------------------------------------

void channel_fuzz() {
  std::uint64_t worst_ex = 0, worst_false = 0;
  int stable = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    auto r = harness::run_channel(seed, 40);
    stable += r.stabilized && r.fifo_ok;
    worst_ex = std::max(worst_ex, r.last_bad_exchange);
    worst_false = std::max(worst_false, r.false_acks);
  }
  std::ostringstream os;
  os << "seeds=1000 stabilized=" << stable << " worst_exchanges=" << worst_ex
     << " worst_false_acks=" << worst_false;
  report(7, stable == 1000 && worst_ex <= 3 && worst_false <= kDeltaComm, os.str());
}

// ---- 8 ------------------------------------------------------------------

void determinism() {
  fs::path dir = fs::temp_directory_path() / "renaissance_acceptance";
  fs::create_directories(dir);
  std::string cfg = (dir / "det.cfg").string();
  std::ofstream(cfg) << "id=det\ntopology=" << kData << "/b4.topo\n"
                     << "fault=corrupt at=0\nfault=remove-link 5-6 at=legit\n";
  auto once = [&](const std::string& tag) {
    RunOptions o;
    o.verbosity = 0;
    o.seeds = {3, 4};
    o.trace = (dir / (tag + ".trace")).string();
    o.csv = (dir / (tag + ".csv")).string();
    fs::remove(o.csv);
    std::ostringstream out, err;
    cmd_run(cfg, o, out, err);
    std::ifstream t(o.trace), c(o.csv);
    std::stringstream ts, cs;
    ts << t.rdbuf();
    cs << c.rdbuf();
    return std::make_pair(ts.str(), cs.str());
  };
  auto a = once("a"), b = once("b");
  fs::remove_all(dir);
  std::ostringstream os;
  os << "trace_bytes=" << a.first.size() << " csv_bytes=" << a.second.size();
  report(8, !a.first.empty() && a == b, os.str());
}

}  // namespace

int main() {
  bootstrap();
  corruption_sweep();
  link_failure();
  fail_stop();
  memory_bounds();
  resilience_matrix();
  channel_fuzz();
  determinism();
  std::cout << (failures ? "acceptance: FAIL" : "acceptance: PASS") << std::endl;
  return failures ? 1 : 0;
}
