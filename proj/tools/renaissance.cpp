#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "renaissance/cli.hpp"

using namespace renaissance;

int main(int argc, char** argv) {
  CLI::App app{"renaissance: self-stabilizing in-band SDN control plane simulator"};
  app.require_subcommand(1);

  RunOptions ro;
  std::string config_path, seeds_text;
  std::uint64_t seed = 0, max_steps = 0;
  auto* run = app.add_subcommand("run", "run a scenario config, emit CSV rows");
  run->add_option("config", config_path, "scenario file (key=value lines)")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
  auto* seeds_opt = run->add_option("--seeds", seeds_text, "seed range A..B, one row per seed");
  seed_opt->excludes(seeds_opt);
  auto* steps_opt = run->add_option("--max-steps", max_steps, "step budget per run");
  run->add_option("--csv", ro.csv, "append rows here instead of stdout");
  run->add_option("--trace", ro.trace, "write the event trace here");

  std::string topo_path;
  std::uint32_t kappa = 1;
  auto* verify = app.add_subcommand("verify", "check kappa-resilience of synthesized flows");
  verify->add_option("topology", topo_path, "topology file")->required();
  verify->add_option("--kappa", kappa, "link failures to tolerate")->required();

  std::string family, out_path;
  std::vector<std::string> params;
  auto* gen = app.add_subcommand("gen", "generate a topology file");
  gen->add_option("family", family, "ring | grid | clos-lite | random")->required();
  gen->add_option("params", params, "key=value parameters");
  gen->add_option("-o,--output", out_path, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  ro.verbosity = verbosity_from_env(std::getenv("RENAISSANCE_LOG"));

  if (*run) {
    try {
      if (*seed_opt) ro.seed = seed;
      if (*seeds_opt) ro.seeds = parse_seed_range(seeds_text);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    }
    if (*steps_opt) ro.max_steps = max_steps;
    return cmd_run(config_path, ro, std::cout, std::cerr);
  }
  if (*verify) return cmd_verify(topo_path, kappa, std::cout, std::cerr);

  std::map<std::string, std::string> kv;
  for (const auto& p : params) {
    auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: parameter '" << p << "' is not key=value\n";
      return kExitUsage;
    }
    kv[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return cmd_gen(family, kv, out_path, std::cerr);
}
