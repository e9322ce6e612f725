#include "dhpd/expcli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using dhpd::exp::ExperimentConfig;

ExperimentConfig resolve(const std::string& path, const std::optional<std::string>& out) {
  ExperimentConfig cfg = path.empty() ? dhpd::exp::reference_config() : dhpd::exp::load_config(path);
  if (out) cfg.output.directory = *out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed homotopy primal-dual policy evaluation experiments"};
  app.require_subcommand(1);

  std::string config;
  std::vector<std::string> configs;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;

  auto* generate = app.add_subcommand("generate", "Generate a synthetic problem bundle");
  auto* run = app.add_subcommand("run", "Run the configured solver on a bundle");
  auto* compare = app.add_subcommand("compare", "Align runs on a shared sample grid and plot them");
  auto* verify = app.add_subcommand("verify", "Run the invariant suite on a bundle");
  for (auto* cmd : {generate, run, verify}) {
    cmd->add_option("--config", config, "Config file (defaults to the reference problem)");
    cmd->add_option("--out", out, "Output directory override");
    cmd->add_option("--seed", seed, "Seed override (problem seed for generate, solver seed otherwise)");
  }
  compare->add_option("--config", configs, "Run config files (two or more)")->required();
  compare->add_option("--out", out, "Output directory override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), 2);
  }

  try {
    if (*compare) {
      std::vector<ExperimentConfig> cfgs;
      for (const auto& path : configs) cfgs.push_back(resolve(path, out));
      return dhpd::exp::cmd_compare(cfgs, cfgs.front().output.directory, std::cout);
    }
    ExperimentConfig cfg = resolve(config, out);
    if (*generate) {
      if (seed) cfg.problem.seed = *seed;
      return dhpd::exp::cmd_generate(cfg, std::cout);
    }
    if (seed) cfg.solver.seed = *seed;
    if (*run) return dhpd::exp::cmd_run(cfg, std::cout);
    return dhpd::exp::cmd_verify(cfg, std::cout);
  } catch (const dhpd::exp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const dhpd::AssumptionError& e) {
    std::cerr << "assumption violated: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
