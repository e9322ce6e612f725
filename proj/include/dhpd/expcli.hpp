#pragma once

#include "dhpd/analysis.hpp"
#include "dhpd/chain.hpp"
#include "dhpd/features.hpp"
#include "dhpd/io.hpp"
#include "dhpd/network.hpp"
#include "dhpd/objective.hpp"
#include "dhpd/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dhpd::exp {

/// Malformed config text; `line` is 1-based (0 when not tied to a line).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ProblemConfig {
  std::size_t n_states = 50;
  std::size_t n_agents = 10;
  std::size_t d = 8;
  double gamma = 0.95;
  std::size_t branching = 3;
  std::string features = "random";  // random | tabular
  std::uint64_t seed = 1;
  double reward_noise = 0.0;
  bool operator==(const ProblemConfig&) const = default;
};

struct TopologyConfig {
  std::string kind = "erdos_renyi";  // ring | complete | erdos_renyi
  double p = 0.3;
  bool operator==(const TopologyConfig&) const = default;
};

struct SolverConfig {
  std::string algorithm = "dhpd";  // dhpd | spd_central | spd_dist
  double eta1 = 0.1;
  double eta = 0.1;
  std::size_t T1 = 0;  // 0: max(tau, 512)
  std::size_t K = 7;
  std::size_t T = 0;  // 0: match the samples of the dhpd schedule
  std::uint64_t seed = 1;
  int threads = 1;
  std::string label;  // empty: the algorithm name
  bool operator==(const SolverConfig&) const = default;
};

struct OutputConfig {
  std::string directory = "out";
  double checkpoint_growth = 1.1;
  bool operator==(const OutputConfig&) const = default;
};

/// Flat `section.key = value` lines; `#` starts a comment.
struct ExperimentConfig {
  ProblemConfig problem;
  TopologyConfig topology;
  SolverConfig solver;
  OutputConfig output;
  bool operator==(const ExperimentConfig&) const = default;

  std::string run_label() const { return solver.label.empty() ? solver.algorithm : solver.label; }
  std::filesystem::path bundle_dir() const;
  std::filesystem::path run_dir() const;
  void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical text: every key, fixed order, reals at full precision.
std::string to_string(const ExperimentConfig& cfg);

/// The fixed desk-scale reference problem.
ExperimentConfig reference_config();

/// Everything a run needs, read back from a generated bundle.
struct Bundle {
  PolicyChain chain;
  FeatureMap features;
  SaddleModel model;
  MixingMatrix mixing;
  io::KeyValues manifest;
  std::string fingerprint;  // hash of the manifest bytes
};

Bundle load_bundle(const std::filesystem::path& dir);

/// T1 = max(tau(T), 512) with T = (2^K - 1) T1, iterated to a fixed point.
std::size_t reference_t1(double Gamma, double rho, std::size_t K);

/// Samples consumed by a schedule, and the single-round horizon that
/// consumes the same number.
std::size_t schedule_samples(const DhpdConfig& cfg);

struct CompareCurve {
  std::string label;
  std::vector<std::size_t> samples;
  std::vector<double> mean_gap;
};

/// Standalone log-log line chart.
std::string render_svg(const std::vector<CompareCurve>& curves, const std::string& title);

/// Each command logs progress to `log` and returns the process exit code.
int cmd_generate(const ExperimentConfig& cfg, std::ostream& log);
int cmd_run(const ExperimentConfig& cfg, std::ostream& log);
int cmd_compare(const std::vector<ExperimentConfig>& cfgs, const std::filesystem::path& out_dir,
                std::ostream& log);
int cmd_verify(const ExperimentConfig& cfg, std::ostream& log);

/// The invariant suite behind cmd_verify.
CheckReport verify_bundle(const ExperimentConfig& cfg, const Bundle& bundle);

}  // namespace dhpd::exp
