#pragma once

#include "dhpd/rng.hpp"
#include "dhpd/types.hpp"

#include <cstddef>
#include <filesystem>
#include <vector>

namespace dhpd {

/// One observed step of the environment: the jointly observed transition and
/// the private reward each agent received on it.
struct SampleTransition {
  std::size_t s = 0;
  std::size_t s_next = 0;
  Vector local_rewards;

  bool operator==(const SampleTransition& o) const {
    return s == o.s && s_next == o.s_next && local_rewards == o.local_rewards;
  }
};

/// A multi-agent MDP already reduced under a fixed joint policy: the induced
/// transition matrix, each agent's expected local reward per state, and the
/// discount. Immutable after construction.
class PolicyChain {
 public:
  /// `rewards` is N x |S|. Throws std::invalid_argument unless P is square,
  /// nonnegative and row-stochastic to 1e-12, and gamma lies in (0, 1).
  PolicyChain(Matrix transition, Matrix rewards, double gamma);

  std::size_t n_states() const { return static_cast<std::size_t>(transition_.rows()); }
  std::size_t n_agents() const { return static_cast<std::size_t>(rewards_.rows()); }
  const Matrix& transition() const { return transition_; }
  const Matrix& rewards() const { return rewards_; }
  double gamma() const { return gamma_; }

  /// Network-average reward per state.
  Vector global_rewards() const;

  bool is_irreducible() const;
  bool is_aperiodic() const;
  bool is_ergodic() const { return is_irreducible() && is_aperiodic(); }

  /// Inverse-CDF draw of the successor of `s` given u in [0, 1).
  std::size_t successor(std::size_t s, double u) const;

 private:
  Matrix transition_;
  Matrix rewards_;
  double gamma_;
  Matrix cumulative_;  // row-wise prefix sums of transition_
};

/// Zero-mean uniform reward noise on [-amplitude, amplitude].
struct RewardNoise {
  double amplitude = 0.0;
};

/// A single Markovian sample stream. Each call to next() advances the chain
/// one step and reports the transition with realized local rewards.
class MarkovSampler {
 public:
  MarkovSampler(const PolicyChain& chain, std::uint64_t seed, std::size_t initial_state = 0,
                RewardNoise noise = {});

  SampleTransition next();
  std::size_t state() const { return state_; }

 private:
  const PolicyChain* chain_;
  Rng rng_;
  std::size_t state_;
  RewardNoise noise_;
};

/// Power iteration (tolerance 1e-12, at most 1e6 sweeps) with a direct
/// solve fallback for |S| <= 500. Throws AssumptionError for reducible chains
/// and ConvergenceError if neither route reaches the 1e-10 residual.
Vector stationary_distribution(const PolicyChain& chain);

std::vector<SampleTransition> sample_trajectory(const PolicyChain& chain, std::size_t length,
                                                std::uint64_t seed, RewardNoise noise = {},
                                                std::size_t initial_state = 0);

/// Sum of absolute differences (twice the largest event-probability gap).
double tv_distance(const Vector& p, const Vector& q);

/// Geometric envelope d_tv(e_s^T P^t, Pi) <= Gamma * rho^t, t >= 1.
struct MixingEstimate {
  double Gamma = 1.0;
  /// 0 means the chain is exactly mixed after one step (rank-one P).
  double rho = 0.0;
  /// worst_tv[t-1] = max_s d_tv(e_s^T P^t, Pi).
  std::vector<double> worst_tv;
};

/// The envelope fit stops once the worst-case tv distance drops below this;
/// smaller values are dominated by rounding error in Pi.
inline constexpr double kTvFloor = 1e-9;

/// Measures the worst-start tv decay until it drops below kTvFloor (or
/// `max_horizon` steps) and fits the envelope from the tail rate.
MixingEstimate estimate_mixing(const PolicyChain& chain, std::size_t max_horizon = 20000);

/// d_tv(e_s^T P^t, Pi) for t = 1..horizon.
std::vector<double> tv_decay(const PolicyChain& chain, const Vector& stationary,
                             std::size_t start, std::size_t horizon);

/// Synthetic ergodic chain: every row keeps a 0.05 self-loop and spreads the
/// rest with Dirichlet-uniform weights over `branching` support points, one of
/// which is the row's successor on a random Hamiltonian cycle (irreducibility).
/// Local rewards split a uniform [0, 1) total reward in random proportions.
PolicyChain random_ergodic_chain(std::size_t n_states, std::size_t n_agents,
                                 std::size_t branching, std::uint64_t seed,
                                 double gamma = 0.95);

/// CSV with header `t,s,s_next,r_1,...,r_N`, t starting at 1.
void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<SampleTransition>& trajectory);
std::vector<SampleTransition> read_trajectory_csv(const std::filesystem::path& path);

}  // namespace dhpd
