#pragma once

#include "dhpd/chain.hpp"
#include "dhpd/features.hpp"
#include "dhpd/kernels.hpp"
#include "dhpd/network.hpp"
#include "dhpd/objective.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dhpd {

/// Restart schedule: round k (1-based) runs T_k = 2^{k-1} T1 iterates with
/// step eta_k = eta1 / 2^{k-1}.
struct DhpdConfig {
  double eta1 = 0.1;
  std::size_t T1 = 512;
  std::size_t K = 1;
  std::uint64_t seed = 0;

  double eta(std::size_t k) const { return std::ldexp(eta1, -static_cast<int>(k - 1)); }
  std::size_t horizon(std::size_t k) const { return T1 << (k - 1); }
  /// (2^K - 1) T1.
  std::size_t total_iterations() const { return ((std::size_t{1} << K) - 1) * T1; }
  void validate() const;
};

/// One agent's slice of the distributed loop state.
struct AgentState {
  Vector x_lazy;
  Vector x;
  Vector y_lazy;
  Vector y;
  Vector x_sum;
  Vector y_sum;
};
AgentState agent_state(const NetworkState& state, std::size_t j);

enum class Execution { serial, parallel };

/// Maps an averaged primal iterate to its optimality gap.
using GapOracle = std::function<double(const Vector&)>;

struct RunOptions {
  Execution execution = Execution::serial;
  int threads = 1;
  /// Checkpoints sit on the absolute grid g_0 = 1, g_{i+1} = max(g_i + 1,
  /// ceil(growth * g_i)) of cumulative samples, plus every round end.
  double checkpoint_growth = 1.1;
  std::size_t initial_state = 0;
  RewardNoise noise;
  /// Keep every iterate (memory grows with T); needed by the inequality verifiers.
  bool log_iterates = false;
  /// When present, the run records a warning if the step/horizon hypotheses
  /// of the rate guarantee fail.
  std::optional<double> rho_x;
  std::optional<double> rho_y;
  std::optional<std::size_t> tau;
};

struct Checkpoint {
  std::size_t samples = 0;
  std::size_t round = 0;
  std::vector<double> gaps;  // one per agent (a single entry for the centralized run)
  Matrix x_hat;              // running averages, one column per agent
  Matrix y_hat;
  double mean_gap() const;
};

struct RoundOutput {
  std::size_t round = 0;
  double eta = 0.0;
  std::size_t horizon = 0;  // iterates averaged (samples consumed = horizon - 1)
  std::size_t samples_end = 0;
  Matrix x_hat;
  Matrix y_hat;
  /// Initialization of the following round (empty after the last round).
  Matrix next_x, next_x_lazy, next_y, next_y_lazy;
};

/// Full iterate history of one round: entry t-1 holds z(t), t = 1..T_k.
struct RoundIterates {
  double eta = 0.0;
  std::vector<Matrix> x;
  std::vector<Matrix> x_lazy;
  std::vector<Matrix> y;
};

struct RunTrace {
  std::vector<Checkpoint> checkpoints;
  std::vector<RoundOutput> rounds;
  std::size_t total_samples = 0;
  std::vector<std::string> warnings;
  std::vector<RoundIterates> iterates;  // filled only with log_iterates

  bool operator==(const RunTrace& other) const;
};

/// Exact arithmetic mean accumulator / count; throws on count == 0.
Vector running_average(const Vector& accumulator, std::size_t count);

/// Algorithm: all agents start at zero; each inner iteration draws one
/// shared Markov sample, mixes lazy primal iterates over W, takes local
/// gradient steps and projects; at each round end every agent restarts
/// (projected and lazy) at its running average, the step halves and the
/// horizon doubles. The sample stream is not reset between rounds.
RunTrace dhpd_run(const SaddleModel& model, const PolicyChain& chain,
                  const FeatureMap& features, const MixingMatrix& mixing, const DhpdConfig& cfg,
                  const GapOracle& gap, const RunOptions& options = {});

/// Fixed-step distributed baseline: one round of T iterates at step eta.
RunTrace spd_run_distributed(const SaddleModel& model, const PolicyChain& chain,
                             const FeatureMap& features, const MixingMatrix& mixing, double eta,
                             std::size_t T, std::uint64_t seed, const GapOracle& gap,
                             const RunOptions& options = {});

/// Centralized baseline: one primal vector and a dual block per agent,
/// G_x = (1/N) sum_j A(xi)^T y_j and per-block G_{y_j} = A(xi) x - b_j(xi) - C(xi) y_j.
RunTrace spd_run_centralized(const SaddleModel& model, const PolicyChain& chain,
                             const FeatureMap& features, double eta, std::size_t T,
                             std::uint64_t seed, const GapOracle& gap,
                             const RunOptions& options = {});

/// Centralized baseline under the same halving/doubling restart schedule.
RunTrace centralized_homotopy_run(const SaddleModel& model, const PolicyChain& chain,
                                  const FeatureMap& features, const DhpdConfig& cfg,
                                  const GapOracle& gap, const RunOptions& options = {});

/// Lazy projection path: w(t+1) = w(t) - eta g(t), u(t+1) = P(w(t+1)),
/// w(1) = u(1). Returns u(1..T).
std::vector<Vector> lazy_projection_path(const Vector& u1, const std::vector<Vector>& grads,
                                         double eta, double radius);

/// `samples,agent,gap` rows, agents 1-based.
void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace);

}  // namespace dhpd
