#include "renaissance/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <tuple>
#include <sstream>

namespace renaissance {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
T number(std::string_view s, const std::string& what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw ConfigError(what + ": not a number: '" + std::string(s) + "'");
  return v;
}

double real(std::string_view s, const std::string& what) {
  std::string str(s);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != str.size())
    throw ConfigError(what + ": not a number: '" + str + "'");
  return v;
}

bool boolean(std::string_view s, const std::string& what) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(what + ": expected true/false, got '" + std::string(s) + "'");
}

std::pair<NodeId, NodeId> link(std::string_view s) {
  auto dash = s.find('-');
  if (dash == std::string_view::npos)
    throw ConfigError("expected U-V, got '" + std::string(s) + "'");
  return {number<NodeId>(s.substr(0, dash), "link"),
          number<NodeId>(s.substr(dash + 1), "link")};
}

unsigned scope_of(std::string_view s) {
  if (s == "all") return kCorruptAll;
  if (!s.empty() && std::isdigit(static_cast<unsigned char>(s[0])))
    return number<unsigned>(s, "scope") & kCorruptAll;
  unsigned bits = 0;
  while (!s.empty()) {
    auto plus = s.find('+');
    auto part = s.substr(0, plus);
    if (part == "switches") bits |= kCorruptSwitches;
    else if (part == "replies") bits |= kCorruptReplies;
    else if (part == "channels") bits |= kCorruptChannels;
    else if (part == "tags") bits |= kCorruptTags;
    else if (part == "detectors") bits |= kCorruptDetectors;
    else throw ConfigError("unknown corruption scope '" + std::string(part) + "'");
    if (plus == std::string_view::npos) break;
    s.remove_prefix(plus + 1);
  }
  return bits;
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

}  // namespace

FaultSpec parse_fault(std::string_view text) {
  auto w = words(text);
  if (w.empty()) throw ConfigError("empty fault");
  FaultSpec f;
  f.at_step = 0;
  std::size_t next = 1;
  auto need = [&](const char* what) {
    if (next >= w.size())
      throw ConfigError(std::string("fault '") + std::string(w[0]) +
                        "' needs " + what);
    return w[next++];
  };
  std::string_view kind = w[0];
  if (kind == "corrupt") {
    f.kind = FaultKind::corrupt_state;
  } else if (kind == "failstop") {
    f.kind = FaultKind::fail_stop_controller;
    f.a = number<NodeId>(need("a controller id"), "failstop");
  } else if (kind == "remove-switch") {
    f.kind = FaultKind::remove_switch;
    f.a = number<NodeId>(need("a switch id"), "remove-switch");
  } else if (kind == "remove-link" || kind == "add-link" ||
             kind == "packet-plan") {
    f.kind = kind == "remove-link" ? FaultKind::remove_link
             : kind == "add-link"  ? FaultKind::add_link
                                   : FaultKind::packet_plan;
    std::tie(f.a, f.b) = link(need("a link U-V"));
  } else {
    throw ConfigError("unknown fault kind '" + std::string(kind) + "'");
  }

  for (; next < w.size(); ++next) {
    auto eq = w[next].find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("unexpected fault argument '" + std::string(w[next]) + "'");
    auto key = w[next].substr(0, eq), val = w[next].substr(eq + 1);
    if (key == "at") {
      if (val == "legit") {
        f.at_legitimacy = true;
        f.at_step.reset();
      } else {
        f.at_step = number<std::uint64_t>(val, "at");
        f.at_legitimacy = false;
      }
    } else if (f.kind == FaultKind::corrupt_state && key == "scope") {
      f.scope = scope_of(val);
    } else if (f.kind == FaultKind::corrupt_state && key == "seed") {
      f.seed = number<std::uint64_t>(val, "seed");
    } else if (f.kind == FaultKind::packet_plan && key == "omit_first") {
      f.plan.omit_first = number<std::uint32_t>(val, "omit_first");
    } else if (f.kind == FaultKind::packet_plan && key == "omit_prob") {
      f.plan.omit_prob = real(val, "omit_prob");
    } else if (f.kind == FaultKind::packet_plan && key == "max_consecutive") {
      f.plan.max_consecutive = number<std::uint32_t>(val, "max_consecutive");
    } else if (f.kind == FaultKind::packet_plan && key == "dup_prob") {
      f.plan.dup_prob = real(val, "dup_prob");
    } else {
      throw ConfigError("unknown fault argument '" + std::string(key) + "'");
    }
  }
  if (f.plan.omit_prob < 0 || f.plan.omit_prob > 1 || f.plan.dup_prob < 0 ||
      f.plan.dup_prob > 1)
    throw ConfigError("probabilities must lie in [0, 1]");
  return f;
}

ScenarioConfig parse_config(std::string_view text, const std::string& base_dir) {
  ScenarioConfig c;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    std::string key(trim(line.substr(0, eq)));
    auto val = trim(line.substr(eq + 1));
    try {
      if (key == "id") c.id = std::string(val);
      else if (key == "topology") c.topology = resolve(base_dir, std::string(val));
      else if (key == "controllers") c.controllers = number<std::uint32_t>(val, key);
      else if (key == "kappa") c.kappa = number<std::uint32_t>(val, key);
      else if (key == "theta") c.theta = number<std::uint32_t>(val, key);
      else if (key == "three_tag") c.three_tag = boolean(val, key);
      else if (key == "memory_adaptive") c.memory_adaptive = boolean(val, key);
      else if (key == "max_replies") c.max_replies = number<std::size_t>(val, key);
      else if (key == "seed") c.seed = number<std::uint64_t>(val, key);
      else if (key == "max_steps") c.max_steps = number<std::uint64_t>(val, key);
      else if (key == "fault") c.faults.push_back(parse_fault(val));
      else if (key == "csv") c.csv = resolve(base_dir, std::string(val));
      else if (key == "trace") c.trace = resolve(base_dir, std::string(val));
      else throw ConfigError("unknown key '" + key + "'");
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (c.topology.empty()) throw ConfigError("missing topology=");
  if (c.theta == 0) throw ConfigError("theta must be positive");
  if (c.id.find_first_of(",\"\n") != std::string::npos)
    throw ConfigError("id may not contain commas, quotes or newlines");
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fs::path(path).parent_path().string());
}

Scenario make_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  if (!fs::exists(cfg.topology))
    throw std::runtime_error("cannot read topology file: " + cfg.topology);
  Scenario sc;
  sc.id = cfg.id;
  sc.engine.graph = load_topology_file(cfg.topology);
  const Graph& g = sc.engine.graph;
  if (cfg.controllers && *cfg.controllers != g.n_controllers())
    throw ConfigError("controllers=" + std::to_string(*cfg.controllers) +
                      " but the topology declares " +
                      std::to_string(g.n_controllers()));
  sc.engine.kappa = cfg.kappa;
  sc.engine.theta = cfg.theta;
  sc.engine.three_tag = cfg.three_tag;
  sc.engine.memory_adaptive = cfg.memory_adaptive;
  sc.engine.max_replies = cfg.max_replies;
  sc.engine.seed = seed;
  sc.max_steps = cfg.max_steps;
  for (const auto& f : cfg.faults) {
    bool ok = true;
    switch (f.kind) {
      case FaultKind::corrupt_state: break;
      case FaultKind::fail_stop_controller: ok = g.is_controller(f.a); break;
      case FaultKind::remove_switch: ok = g.is_switch(f.a); break;
      default: ok = g.in_range(f.a) && g.in_range(f.b) && f.a != f.b; break;
    }
    if (!ok) throw ConfigError("fault names nodes outside the topology: " + to_string(f));
  }
  sc.faults = cfg.faults;
  return sc;
}

std::string csv_header() {
  return "scenario,seed,converged,frames,steps,c_resets,illegit_deletions,"
         "max_rules_per_switch,messages_per_frame";
}

std::string csv_row(const std::string& id, std::uint64_t seed,
                    const RunMetrics& m) {
  std::uint64_t resets = 0;
  for (auto [_, n] : m.c_resets) resets += n;
  std::ostringstream os;
  os << id << ',' << seed << ',' << (m.converged ? 1 : 0) << ','
     << m.frames_to_legit << ',' << m.steps << ',' << resets << ','
     << m.illegit_deletions << ',' << m.max_rules_per_switch << ','
     << std::fixed << std::setprecision(2) << m.messages_per_frame;
  return os.str();
}

std::vector<std::uint64_t> parse_seed_range(std::string_view text) {
  auto dots = text.find("..");
  std::uint64_t a, b;
  if (dots == std::string_view::npos) {
    a = b = number<std::uint64_t>(text, "seed");
  } else {
    a = number<std::uint64_t>(text.substr(0, dots), "seed range");
    b = number<std::uint64_t>(text.substr(dots + 2), "seed range");
  }
  if (b < a) throw ConfigError("empty seed range " + std::string(text));
  if (b - a >= 1000000) throw ConfigError("seed range too large");
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
  return out;
}

// ---- generators ---------------------------------------------------------

namespace {

struct Params {
  const std::map<std::string, std::string>& raw;
  std::set<std::string> used;

  std::uint32_t get(const std::string& k, std::uint32_t dflt) {
    used.insert(k);
    auto it = raw.find(k);
    return it == raw.end() ? dflt : number<std::uint32_t>(it->second, k);
  }
  double get_real(const std::string& k, double dflt) {
    used.insert(k);
    auto it = raw.find(k);
    return it == raw.end() ? dflt : real(it->second, k);
  }
  void finish() const {
    for (const auto& [k, _] : raw)
      if (!used.contains(k)) throw ConfigError("unknown parameter '" + k + "'");
  }
};

// Controller c takes `links` consecutive slots starting at an evenly spread
// offset into `anchors`.
void attach_controllers(Graph& g, const std::vector<NodeId>& anchors,
                        std::uint32_t links) {
  const auto nc = g.n_controllers();
  const auto n = static_cast<std::uint32_t>(anchors.size());
  if (links > n) throw ConfigError("not enough switches to attach controllers");
  for (NodeId c = 1; c <= nc; ++c) {
    std::uint32_t off = (c - 1) * n / nc;
    for (std::uint32_t k = 0; k < links; ++k)
      g.add_edge(c, anchors[(off + k) % n]);
  }
}

}  // namespace

Graph generate_topology(const std::string& family,
                        const std::map<std::string, std::string>& params) {
  Params p{params, {}};
  const std::uint32_t nc = p.get("controllers", 2);
  if (nc == 0) throw ConfigError("controllers must be at least 1");

  if (family == "ring") {
    const std::uint32_t n = p.get("n", 8);
    p.finish();
    if (n < 3) throw ConfigError("ring needs n >= 3");
    Graph g(nc, n);
    auto sw = g.switches();
    for (std::uint32_t i = 0; i < n; ++i) g.add_edge(sw[i], sw[(i + 1) % n]);
    attach_controllers(g, sw, 2);
    return g;
  }
  if (family == "grid") {
    const std::uint32_t rows = p.get("rows", 3), cols = p.get("cols", 3);
    p.finish();
    if (rows < 2 || cols < 2) throw ConfigError("grid needs rows, cols >= 2");
    Graph g(nc, rows * cols);
    auto at = [&](std::uint32_t r, std::uint32_t c) { return nc + 1 + r * cols + c; };
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) {
        if (c + 1 < cols) g.add_edge(at(r, c), at(r, c + 1));
        if (r + 1 < rows) g.add_edge(at(r, c), at(r + 1, c));
      }
    // Walk the grid in snake order so consecutive anchors are adjacent.
    std::vector<NodeId> snake;
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t k = 0; k < cols; ++k)
        snake.push_back(at(r, r % 2 ? cols - 1 - k : k));
    attach_controllers(g, snake, 2);
    return g;
  }
  if (family == "clos-lite") {
    const std::uint32_t spine = p.get("spine", 2), leaf = p.get("leaf", 4);
    p.finish();
    if (spine < 1 || leaf < 2) throw ConfigError("clos-lite needs spine >= 1, leaf >= 2");
    Graph g(nc, spine + leaf);
    auto sw = g.switches();
    std::vector<NodeId> leaves(sw.begin() + spine, sw.end());
    for (std::uint32_t s = 0; s < spine; ++s)
      for (NodeId l : leaves) g.add_edge(sw[s], l);
    attach_controllers(g, leaves, 2);
    return g;
  }
  if (family == "random") {
    const std::uint32_t n = p.get("n", 10), k = p.get("k", 2);
    const std::uint64_t seed = p.get("seed", 1);
    const double extra = p.get_real("extra", 0.2);
    p.finish();
    if (n < 3) throw ConfigError("random needs n >= 3");
    if (k >= n) throw ConfigError("k must be below n: no simple graph on " +
                                  std::to_string(n) + " switches has lambda " +
                                  std::to_string(k));
    if (extra < 0 || extra > 1) throw ConfigError("extra must lie in [0, 1]");
    std::mt19937_64 rng(seed);
    const std::uint32_t links = std::max<std::uint32_t>(2, k);
    for (int attempt = 0; attempt < 200; ++attempt) {
      Graph g(nc, n);
      auto sw = g.switches();
      std::vector<NodeId> order = sw;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::uint32_t i = 0; i < n; ++i)
        g.add_edge(order[i], order[(i + 1) % n]);
      double dens = std::min(1.0, extra + 0.05 * attempt);
      std::bernoulli_distribution coin(dens);
      for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j)
          if (!g.has_edge(sw[i], sw[j]) && coin(rng)) g.add_edge(sw[i], sw[j]);
      std::vector<NodeId> anchors = sw;
      std::shuffle(anchors.begin(), anchors.end(), rng);
      attach_controllers(g, anchors, links);
      if (edge_connectivity(g) >= k) return g;
    }
    throw ConfigError("could not reach the requested connectivity");
  }
  throw ConfigError("unknown family '" + family +
                    "' (ring, grid, clos-lite, random)");
}

// ---- commands -----------------------------------------------------------

int verbosity_from_env(const char* value) {
  if (!value || !*value) return 1;
  std::string_view v(value);
  if (v == "quiet" || v == "0") return 0;
  if (v == "debug" || v == "2") return 2;
  return 1;
}

int cmd_run(const std::string& config_path, const RunOptions& opt,
            std::ostream& out, std::ostream& err) {
  ScenarioConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    err << "error: " << config_path << ": " << e.what() << "\n";
    return kExitUsage;
  }
  if (opt.max_steps) cfg.max_steps = *opt.max_steps;
  std::vector<std::uint64_t> seeds = opt.seeds;
  if (seeds.empty()) seeds.push_back(opt.seed.value_or(cfg.seed));
  const std::string csv_path = opt.csv.empty() ? cfg.csv : opt.csv;
  const std::string trace_path = opt.trace.empty() ? cfg.trace : opt.trace;

  std::vector<Scenario> runs;
  try {
    for (auto s : seeds) runs.push_back(make_scenario(cfg, s));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  const std::uint32_t lambda = edge_connectivity(runs.front().engine.graph);
  const bool covered = cfg.kappa < lambda;
  if (!covered && opt.verbosity > 0)
    err << "warning: kappa=" << cfg.kappa << " is not below lambda=" << lambda
        << "; run is best-effort\n";

  std::ofstream trace_file;
  if (!trace_path.empty()) {
    trace_file.open(trace_path, std::ios::trunc);
    if (!trace_file) {
      err << "error: cannot write trace file: " << trace_path << "\n";
      return kExitUsage;
    }
  }
  std::ofstream csv_file;
  std::ostream* csv = &out;
  bool header = true;
  if (!csv_path.empty()) {
    header = !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
    csv_file.open(csv_path, std::ios::app);
    if (!csv_file) {
      err << "error: cannot write csv file: " << csv_path << "\n";
      return kExitUsage;
    }
    csv = &csv_file;
  }
  if (header) *csv << csv_header() << "\n";

  bool all_converged = true;
  for (const auto& sc : runs) {
    if (trace_file.is_open() && runs.size() > 1)
      trace_file << "# " << sc.id << " seed=" << sc.engine.seed << "\n";
    RunMetrics m = run_scenario(sc, trace_file.is_open() ? &trace_file : nullptr);
    *csv << csv_row(sc.id, sc.engine.seed, m) << "\n";
    all_converged = all_converged && m.converged;
    if (opt.verbosity > 0)
      err << sc.id << " seed=" << sc.engine.seed
          << (m.converged ? " converged" : " NOT converged")
          << " frames=" << m.frames_to_legit << " steps=" << m.steps << "\n";
    if (opt.verbosity > 1)
      for (std::size_t k = 0; k < m.phases.size(); ++k)
        err << "  phase " << k << ": converged=" << m.phases[k].converged
            << " frames=" << m.phases[k].frames_to_legit
            << " steps=" << m.phases[k].steps_to_legit << "\n";
  }
  if (!all_converged && covered) return kExitNonConvergence;
  return kExitOk;
}

int cmd_verify(const std::string& topology_path, std::uint32_t kappa,
               std::ostream& out, std::ostream& err) {
  Graph g;
  try {
    if (!fs::exists(topology_path))
      throw std::runtime_error("cannot read topology file: " + topology_path);
    g = load_topology_file(topology_path);
  } catch (const std::exception& e) {
    err << "error: " << topology_path << ": " << e.what() << "\n";
    return kExitUsage;
  }
  const std::uint32_t lambda = edge_connectivity(g);
  if (kappa >= lambda)
    err << "warning: kappa=" << kappa << " is not below lambda=" << lambda
        << "; failures are expected\n";
  auto flows = synthesize_all(g, kappa, default_n_prt(kappa));
  auto rep = verify_resilience(g, flows, kappa);
  out << "controllers=" << g.n_controllers() << " switches=" << g.n_switches()
      << " diameter=" << g.diameter() << " lambda=" << lambda << "\n";
  out << "kappa=" << kappa << " failure_sets=" << rep.failure_sets
      << " pairs=" << rep.pairs << " deliveries=" << rep.deliveries_checked
      << "\n";
  out << "result=" << (rep.pass ? "pass" : "fail") << "\n";
  for (const auto& f : rep.failures) out << "witness " << to_string(f) << "\n";
  return rep.pass ? kExitOk : kExitNonConvergence;
}

int cmd_gen(const std::string& family,
            const std::map<std::string, std::string>& params,
            const std::string& out_path, std::ostream& err) {
  Graph g;
  try {
    g = generate_topology(family, params);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) {
    err << "error: cannot write " << out_path << "\n";
    return kExitUsage;
  }
  out << "# " << family;
  for (const auto& [k, v] : params) out << " " << k << "=" << v;
  out << "\n" << format_topology(g);
  return kExitOk;
}

}  // namespace renaissance
