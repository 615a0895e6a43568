#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "renaissance/engine.hpp"
#include "renaissance/topology.hpp"

namespace renaissance {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key=value scenario file. Unknown keys are errors so typos surface.
//
//   id=b4-bootstrap
//   topology=b4.topo        (relative to the config file)
//   kappa=1
//   theta=10
//   three_tag=false
//   memory_adaptive=true
//   max_replies=0
//   seed=1
//   max_steps=200000
//   controllers=3           (optional; must match the topology header)
//   fault=remove-link 5-6 at=legit
//   csv=out.csv
//   trace=out.trace
struct ScenarioConfig {
  std::string id = "scenario";
  std::string topology;
  std::optional<std::uint32_t> controllers;
  std::uint32_t kappa = 1;
  std::uint32_t theta = 10;
  bool three_tag = false;
  bool memory_adaptive = true;
  std::size_t max_replies = 0;
  std::uint64_t seed = 1;
  std::uint64_t max_steps = 200000;
  std::vector<FaultSpec> faults;
  std::string csv;
  std::string trace;
};

// Fault grammar, one per fault= line:
//   corrupt [scope=all|switches+replies+channels+tags+detectors|<bits>] [seed=N]
//   failstop K | remove-switch J | remove-link U-V | add-link U-V
//   packet-plan U-V [omit_first=N] [omit_prob=P] [max_consecutive=N] [dup_prob=P]
// each optionally followed by at=STEP or at=legit (default at=0). A corrupt
// fault without seed= draws from the run seed, so --seeds sweeps vary it.
FaultSpec parse_fault(std::string_view text);

ScenarioConfig parse_config(std::string_view text,
                            const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path);

// Throws TopologyError / std::runtime_error for unreadable topology files.
Scenario make_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

// Columns, in this order:
// scenario,seed,converged,frames,steps,c_resets,illegit_deletions,
// max_rules_per_switch,messages_per_frame
std::string csv_header();
std::string csv_row(const std::string& id, std::uint64_t seed,
                    const RunMetrics& m);

// Seed range "A..B" (inclusive) or a single number.
std::vector<std::uint64_t> parse_seed_range(std::string_view text);

// Topology families. Params are key=value strings; unknown keys throw.
//   ring       n=8 controllers=2
//   grid       rows=3 cols=3 controllers=2
//   clos-lite  spine=2 leaf=4 controllers=2
//   random     n=10 k=2 seed=7 controllers=2 extra=0.3
// Each controller attaches to max(2, k) switches spread over the fabric.
Graph generate_topology(const std::string& family,
                        const std::map<std::string, std::string>& params);

enum ExitCode { kExitOk = 0, kExitNonConvergence = 1, kExitUsage = 2 };

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> max_steps;
  std::string csv;    // overrides the config
  std::string trace;  // overrides the config
  int verbosity = 1;  // 0 quiet, 1 summary, 2 per-phase detail
};

int cmd_run(const std::string& config_path, const RunOptions& opt,
            std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& topology_path, std::uint32_t kappa,
               std::ostream& out, std::ostream& err);
int cmd_gen(const std::string& family,
            const std::map<std::string, std::string>& params,
            const std::string& out_path, std::ostream& err);

// RENAISSANCE_LOG: quiet|info|debug or 0|1|2. Unset means info.
int verbosity_from_env(const char* value);

}  // namespace renaissance
