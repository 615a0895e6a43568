#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "renaissance/cli.hpp"

using namespace renaissance;
namespace fs = std::filesystem;

namespace {

const std::string kData = RENAISSANCE_TEST_DATA;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("renaissance_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    auto p = path / name;
    std::ofstream(p) << text;
    return p.string();
  }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("config keys, defaults and fault schedule") {
  auto c = parse_config(
      "# comment\n"
      "id=demo\n"
      "topology=net.topo\n"
      "kappa=1\n"
      "theta=30\n"
      "three_tag=yes\n"
      "fault=remove-link 5-6 at=legit\n"
      "fault=corrupt scope=switches+channels seed=4 at=100\n",
      "/base");
  CHECK(c.id == "demo");
  CHECK(c.topology == "/base/net.topo");
  CHECK(c.theta == 30);
  CHECK(c.three_tag);
  CHECK(c.memory_adaptive);
  REQUIRE(c.faults.size() == 2);
  CHECK(c.faults[0].kind == FaultKind::remove_link);
  CHECK(c.faults[0].at_legitimacy);
  CHECK(c.faults[1].scope == (kCorruptSwitches | kCorruptChannels));
  CHECK(c.faults[1].at_step == 100u);
}

TEST_CASE("config errors carry the line number") {
  CHECK_THROWS_WITH_AS(parse_config("topology=a\nkapa=1\n"),
                       "line 2: unknown key 'kapa'", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("topology=a\nkappa=x\n"),
                       "line 2: kappa: not a number: 'x'", ConfigError);
  CHECK_THROWS_AS(parse_config("kappa=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("topology=a\nfault=explode 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("topology=a\nfault=remove-link 5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("topology=a\nfault=packet-plan 1-2 dup_prob=2\n"),
                  ConfigError);
}

TEST_CASE("fault text round-trips through the trace form") {
  for (const char* text :
       {"corrupt scope=all seed=3", "corrupt scope=replies+tags seed=0",
        "failstop 2", "remove-switch 7", "remove-link 3-4", "add-link 3-9",
        "packet-plan 4-5 omit_first=2 omit_prob=0.25 max_consecutive=3 dup_prob=0.1"}) {
    CAPTURE(text);
    CHECK(to_string(parse_fault(text)) == text);
  }
}

TEST_CASE("seed ranges") {
  CHECK(parse_seed_range("3..6") == std::vector<std::uint64_t>{3, 4, 5, 6});
  CHECK(parse_seed_range("9") == std::vector<std::uint64_t>{9});
  CHECK_THROWS_AS(parse_seed_range("6..3"), ConfigError);
  CHECK_THROWS_AS(parse_seed_range("a..b"), ConfigError);
}

TEST_CASE("csv columns stay in order") {
  CHECK(csv_header() ==
        "scenario,seed,converged,frames,steps,c_resets,illegit_deletions,"
        "max_rules_per_switch,messages_per_frame");
  RunMetrics m;
  m.converged = true;
  m.frames_to_legit = 5;
  m.steps = 515;
  m.c_resets = {{1, 1}, {2, 0}};
  m.illegit_deletions = 2;
  m.max_rules_per_switch = 34;
  m.messages_per_frame = 228.0;
  CHECK(csv_row("b4", 1, m) == "b4,1,1,5,515,1,2,34,228.00");
}

TEST_CASE("ring generator matches the hand-written fixture") {
  Graph g = generate_topology("ring", {{"n", "8"}});
  CHECK(g == load_topology_file(kData + "/ring8.topo"));
  CHECK(edge_connectivity(g) == 2);
}

TEST_CASE("generated families") {
  Graph grid = generate_topology("grid", {{"rows", "3"}, {"cols", "4"}});
  CHECK(grid.n_switches() == 12);
  CHECK(edge_connectivity(grid) == 2);

  Graph clos = generate_topology("clos-lite", {{"spine", "2"}, {"leaf", "4"}});
  CHECK(clos.n_switches() == 6);
  CHECK(clos.n_controllers() == 2);
  CHECK(edge_connectivity(clos) == 2);

  Graph a = generate_topology("random", {{"n", "10"}, {"k", "2"}, {"seed", "7"}});
  Graph b = generate_topology("random", {{"n", "10"}, {"k", "2"}, {"seed", "7"}});
  CHECK(a == b);
  CHECK(edge_connectivity(a) >= 2);
  Graph k3 = generate_topology("random", {{"n", "8"}, {"k", "3"}, {"seed", "1"}});
  CHECK(edge_connectivity(k3) >= 3);

  CHECK_THROWS_AS(generate_topology("random", {{"n", "3"}, {"k", "3"}}), ConfigError);
  CHECK_THROWS_AS(generate_topology("mesh", {}), ConfigError);
  CHECK_THROWS_AS(generate_topology("ring", {{"size", "8"}}), ConfigError);
}

TEST_CASE("run: missing topology exits 2 and names the path") {
  TempDir t;
  auto cfg = t.write("s.cfg", "topology=nowhere.topo\n");
  std::ostringstream out, err;
  CHECK(cmd_run(cfg, {}, out, err) == kExitUsage);
  CHECK(err.str().find("nowhere.topo") != std::string::npos);
  CHECK(cmd_run((t.path / "absent.cfg").string(), {}, out, err) == kExitUsage);
}

TEST_CASE("run: one row per seed, byte-identical on repeat") {
  TempDir t;
  auto cfg = t.write("s.cfg", "id=r8\ntopology=" + kData +
                                  "/ring8.topo\nfault=corrupt at=0\n");
  RunOptions o;
  o.verbosity = 0;
  o.seeds = parse_seed_range("1..3");
  o.trace = (t.path / "a.trace").string();
  std::ostringstream out1, out2, err;
  CHECK(cmd_run(cfg, o, out1, err) == kExitOk);
  std::string trace1 = slurp(o.trace);
  CHECK(cmd_run(cfg, o, out2, err) == kExitOk);
  CHECK(out1.str() == out2.str());
  CHECK(trace1 == slurp(o.trace));
  CHECK(lines(out1.str()) == 4);

  // Appending to an existing csv writes the header once.
  o.csv = (t.path / "rows.csv").string();
  std::ostringstream quiet;
  cmd_run(cfg, o, quiet, err);
  cmd_run(cfg, o, quiet, err);
  CHECK(lines(slurp(o.csv)) == 7);
}

TEST_CASE("run: an exhausted step budget is a non-convergence exit") {
  TempDir t;
  auto cfg = t.write("s.cfg", "topology=" + kData + "/b4.topo\nmax_steps=50\n");
  RunOptions o;
  o.verbosity = 0;
  std::ostringstream out, err;
  CHECK(cmd_run(cfg, o, out, err) == kExitNonConvergence);
  CHECK(out.str().find(",0,") != std::string::npos);
}

TEST_CASE("verify: ring passes, a bridge fails with a witness") {
  std::ostringstream out, err;
  CHECK(cmd_verify(kData + "/ring8.topo", 1, out, err) == kExitOk);
  CHECK(out.str().find("result=pass") != std::string::npos);

  TempDir t;
  auto path = t.write("path.topo", "1 3\n1-2\n2-3\n3-4\n");
  std::ostringstream out2, err2;
  CHECK(cmd_verify(path, 1, out2, err2) == kExitNonConvergence);
  CHECK(out2.str().find("result=fail") != std::string::npos);
  CHECK(out2.str().find("witness") != std::string::npos);
  CHECK(err2.str().find("warning") != std::string::npos);
}

TEST_CASE("gen writes a loadable file") {
  TempDir t;
  auto p = (t.path / "g.topo").string();
  std::ostringstream err;
  CHECK(cmd_gen("clos-lite", {{"spine", "2"}, {"leaf", "4"}, {"controllers", "3"}},
                p, err) == kExitOk);
  Graph g = load_topology_file(p);
  CHECK(g.n_controllers() == 3);
  CHECK(g.n_switches() == 6);
  CHECK(cmd_gen("random", {{"n", "4"}, {"k", "9"}}, p, err) == kExitUsage);
}

TEST_CASE("log level from the environment") {
  CHECK(verbosity_from_env(nullptr) == 1);
  CHECK(verbosity_from_env("quiet") == 0);
  CHECK(verbosity_from_env("2") == 2);
  CHECK(verbosity_from_env("debug") == 2);
}
