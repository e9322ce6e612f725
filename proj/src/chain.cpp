#include "dhpd/chain.hpp"

#include "dhpd/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace dhpd {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kSelfLoopMass = 0.05;

std::vector<std::vector<std::size_t>> support_lists(const Matrix& p, bool reverse) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < n; ++t)
      if (p(s, t) > 0.0) (reverse ? adj[t] : adj[s]).push_back(reverse ? s : t);
  return adj;
}

std::vector<long> bfs_levels(const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<long> level(adj.size(), -1);
  std::queue<std::size_t> frontier;
  level[0] = 0;
  frontier.push(0);
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u])
      if (level[v] < 0) {
        level[v] = level[u] + 1;
        frontier.push(v);
      }
  }
  return level;
}

Vector solve_stationary_direct(const Matrix& p) {
  const auto n = p.rows();
  Matrix system = p.transpose() - Matrix::Identity(n, n);
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible())
    throw AssumptionError("stationary distribution is not unique: chain is not irreducible");
  return lu.solve(rhs);
}

double stationarity_residual(const Matrix& p, const Vector& pi) {
  return (p.transpose() * pi - pi).lpNorm<1>();
}

}  // namespace

PolicyChain::PolicyChain(Matrix transition, Matrix rewards, double gamma)
    : transition_(std::move(transition)), rewards_(std::move(rewards)), gamma_(gamma) {
  if (transition_.rows() == 0 || transition_.rows() != transition_.cols())
    throw std::invalid_argument("transition matrix must be square and nonempty");
  if (rewards_.rows() == 0 || rewards_.cols() != transition_.rows())
    throw std::invalid_argument("rewards must be N x |S| with N >= 1");
  if (!(gamma_ > 0.0 && gamma_ < 1.0))
    throw std::invalid_argument("discount must lie in (0, 1)");
  if (!transition_.allFinite() || !rewards_.allFinite())
    throw std::invalid_argument("chain entries must be finite");
  if ((transition_.array() < 0.0).any())
    throw std::invalid_argument("transition probabilities must be nonnegative");
  for (Eigen::Index s = 0; s < transition_.rows(); ++s)
    if (std::abs(transition_.row(s).sum() - 1.0) > kRowSumTol)
      throw std::invalid_argument("row " + std::to_string(s) + " of P does not sum to 1");

  cumulative_.resize(transition_.rows(), transition_.cols());
  for (Eigen::Index s = 0; s < transition_.rows(); ++s) {
    double acc = 0.0;
    for (Eigen::Index t = 0; t < transition_.cols(); ++t) {
      acc += transition_(s, t);
      cumulative_(s, t) = acc;
    }
  }
}

Vector PolicyChain::global_rewards() const { return rewards_.colwise().mean().transpose(); }

bool PolicyChain::is_irreducible() const {
  const auto fwd = bfs_levels(support_lists(transition_, false));
  const auto bwd = bfs_levels(support_lists(transition_, true));
  return std::ranges::none_of(fwd, [](long l) { return l < 0; }) &&
         std::ranges::none_of(bwd, [](long l) { return l < 0; });
}

bool PolicyChain::is_aperiodic() const {
  // Period of the class containing state 0: gcd over support edges u->v of
  // level(u) + 1 - level(v).
  const auto adj = support_lists(transition_, false);
  const auto level = bfs_levels(adj);
  long period = 0;
  for (std::size_t u = 0; u < adj.size(); ++u) {
    if (level[u] < 0) continue;
    for (auto v : adj[u]) period = std::gcd(period, std::abs(level[u] + 1 - level[v]));
  }
  return period == 1;
}

std::size_t PolicyChain::successor(std::size_t s, double u) const {
  const auto row = cumulative_.row(static_cast<Eigen::Index>(s));
  const auto n = static_cast<std::size_t>(row.size());
  // The last support point absorbs rounding in the final prefix sum.
  std::size_t last = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (transition_(s, t) <= 0.0) continue;
    last = t;
    if (u < row(t)) return t;
  }
  return last;
}

MarkovSampler::MarkovSampler(const PolicyChain& chain, std::uint64_t seed,
                             std::size_t initial_state, RewardNoise noise)
    : chain_(&chain), rng_(seed), state_(initial_state), noise_(noise) {
  if (initial_state >= chain.n_states())
    throw std::invalid_argument("initial state out of range");
  if (noise.amplitude < 0.0) throw std::invalid_argument("noise amplitude must be >= 0");
}

SampleTransition MarkovSampler::next() {
  SampleTransition xi;
  xi.s = state_;
  xi.s_next = chain_->successor(state_, rng_.uniform());
  xi.local_rewards = chain_->rewards().col(static_cast<Eigen::Index>(state_));
  if (noise_.amplitude > 0.0)
    for (Eigen::Index j = 0; j < xi.local_rewards.size(); ++j)
      xi.local_rewards(j) += rng_.uniform(-noise_.amplitude, noise_.amplitude);
  state_ = xi.s_next;
  return xi;
}

Vector stationary_distribution(const PolicyChain& chain) {
  const Matrix& p = chain.transition();
  const auto n = p.rows();
  if (!chain.is_irreducible())
    throw AssumptionError("chain is not irreducible; stationary distribution is not unique");

  Vector pi = Vector::Constant(n, 1.0 / static_cast<double>(n));
  bool converged = false;
  if (chain.is_aperiodic()) {
    const Matrix pt = p.transpose();
    for (long it = 0; it < 1'000'000; ++it) {
      Vector next = pt * pi;
      next /= next.sum();
      const double change = (next - pi).lpNorm<1>();
      pi.swap(next);
      if (change < 1e-12) {
        converged = true;
        break;
      }
    }
  }
  if (!converged || stationarity_residual(p, pi) > 1e-10) {
    if (n > 500)
      throw ConvergenceError("power iteration did not converge and |S| > 500");
    pi = solve_stationary_direct(p);
  }
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  if (stationarity_residual(p, pi) > 1e-10)
    throw ConvergenceError("stationary distribution residual exceeds 1e-10");
  return pi;
}

std::vector<SampleTransition> sample_trajectory(const PolicyChain& chain, std::size_t length,
                                                std::uint64_t seed, RewardNoise noise,
                                                std::size_t initial_state) {
  if (length < 1) throw std::invalid_argument("trajectory length must be >= 1");
  MarkovSampler sampler(chain, seed, initial_state, noise);
  std::vector<SampleTransition> out;
  out.reserve(length);
  for (std::size_t t = 0; t < length; ++t) out.push_back(sampler.next());
  return out;
}

double tv_distance(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: dimension mismatch");
  return (p - q).lpNorm<1>();
}

std::vector<double> tv_decay(const PolicyChain& chain, const Vector& stationary,
                             std::size_t start, std::size_t horizon) {
  const Matrix pt = chain.transition().transpose();
  Vector dist = Vector::Zero(static_cast<Eigen::Index>(chain.n_states()));
  dist(static_cast<Eigen::Index>(start)) = 1.0;
  std::vector<double> out;
  out.reserve(horizon);
  for (std::size_t t = 1; t <= horizon; ++t) {
    dist = pt * dist;
    out.push_back(tv_distance(dist, stationary));
  }
  return out;
}

MixingEstimate estimate_mixing(const PolicyChain& chain, std::size_t max_horizon) {
  if (!chain.is_ergodic()) throw AssumptionError("estimate_mixing requires an ergodic chain");
  const Vector pi = stationary_distribution(chain);
  const Matrix& p = chain.transition();
  const Eigen::Index n = p.rows();

  MixingEstimate est;
  Matrix power = p;
  for (std::size_t t = 1; t <= max_horizon; ++t) {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < n; ++s)
      worst = std::max(worst, (power.row(s).transpose() - pi).lpNorm<1>());
    est.worst_tv.push_back(worst);
    if (worst < kTvFloor) break;
    power = power * p;
  }

  // Last index still above the floor.
  std::size_t t_end = 0;
  for (std::size_t t = 1; t <= est.worst_tv.size(); ++t)
    if (est.worst_tv[t - 1] >= kTvFloor) t_end = t;

  if (t_end == 0) {
    est.rho = 0.0;
    est.Gamma = 1.0;
    return est;
  }
  if (t_end == est.worst_tv.size() && t_end == max_horizon) {
    const double first = est.worst_tv.front();
    if (est.worst_tv.back() >= first * (1.0 - 1e-9))
      throw AssumptionError("total variation distance does not decay");
  }

  // The rate comes from points well above the floor; Gamma still covers all of them.
  std::size_t t_fit = 1;
  for (std::size_t t = 1; t <= t_end; ++t)
    if (est.worst_tv[t - 1] >= 1e-6) t_fit = t;
  const std::size_t t_mid = std::max<std::size_t>(1, t_fit / 2);
  double rho;
  if (t_fit == t_mid) {
    rho = est.worst_tv[t_fit - 1];
  } else {
    rho = std::pow(est.worst_tv[t_fit - 1] / est.worst_tv[t_mid - 1],
                   1.0 / static_cast<double>(t_fit - t_mid));
  }
  rho = std::clamp(rho, 1e-6, 1.0 - 1e-12);

  double gamma_env = 1.0;
  for (std::size_t t = 1; t <= t_end; ++t)
    gamma_env = std::max(gamma_env, est.worst_tv[t - 1] / std::pow(rho, static_cast<double>(t)));
  est.rho = rho;
  est.Gamma = gamma_env;
  return est;
}

PolicyChain random_ergodic_chain(std::size_t n_states, std::size_t n_agents,
                                 std::size_t branching, std::uint64_t seed, double gamma) {
  if (n_states < 1 || n_agents < 1)
    throw std::invalid_argument("need at least one state and one agent");
  if (branching < 1 || branching > n_states)
    throw std::invalid_argument("branching must lie in [1, n_states]");
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(n_states);
  Matrix p = Matrix::Zero(n, n);

  if (n_states == 1) {
    p(0, 0) = 1.0;
  } else {
    std::vector<std::size_t> cycle(n_states);
    std::iota(cycle.begin(), cycle.end(), 0);
    for (std::size_t i = n_states - 1; i > 0; --i) std::swap(cycle[i], cycle[rng.index(i + 1)]);
    std::vector<std::size_t> next_on_cycle(n_states);
    for (std::size_t i = 0; i < n_states; ++i)
      next_on_cycle[cycle[i]] = cycle[(i + 1) % n_states];

    for (std::size_t s = 0; s < n_states; ++s) {
      std::vector<std::size_t> support{next_on_cycle[s]};
      std::vector<std::size_t> rest;
      for (std::size_t t = 0; t < n_states; ++t)
        if (t != next_on_cycle[s]) rest.push_back(t);
      for (std::size_t k = 1; k < branching; ++k) {
        const auto pick = rng.index(rest.size());
        support.push_back(rest[pick]);
        rest.erase(rest.begin() + static_cast<long>(pick));
      }
      std::vector<double> w(support.size());
      double total = 0.0;
      for (auto& wi : w) total += (wi = rng.exponential());
      const auto row = static_cast<Eigen::Index>(s);
      p(row, row) += kSelfLoopMass;
      for (std::size_t k = 0; k < support.size(); ++k)
        p(row, static_cast<Eigen::Index>(support[k])) += (1.0 - kSelfLoopMass) * w[k] / total;
      p.row(row) /= p.row(row).sum();
    }
  }

  Matrix rewards(static_cast<Eigen::Index>(n_agents), n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const double total_reward = rng.uniform();
    Vector share(static_cast<Eigen::Index>(n_agents));
    for (Eigen::Index j = 0; j < share.size(); ++j) share(j) = rng.exponential();
    share /= share.sum();
    rewards.col(s) = total_reward * share;
  }
  return PolicyChain(std::move(p), std::move(rewards), gamma);
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const std::vector<SampleTransition>& trajectory) {
  const std::size_t n_agents =
      trajectory.empty() ? 0 : static_cast<std::size_t>(trajectory.front().local_rewards.size());
  std::string text = "t,s,s_next";
  for (std::size_t j = 1; j <= n_agents; ++j) text += ",r_" + std::to_string(j);
  text += '\n';
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    const auto& xi = trajectory[t];
    text += std::to_string(t + 1) + ',' + std::to_string(xi.s) + ',' + std::to_string(xi.s_next);
    for (Eigen::Index j = 0; j < xi.local_rewards.size(); ++j)
      text += ',' + io::format_real(xi.local_rewards(j));
    text += '\n';
  }
  io::write_file(path, text);
}

std::vector<SampleTransition> read_trajectory_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty trajectory");
  const auto header = io::split(io::trim(line), ',');
  if (header.size() < 3 || header[0] != "t" || header[1] != "s" || header[2] != "s_next")
    throw std::runtime_error(path.string() + ": bad trajectory header");
  const std::size_t n_agents = header.size() - 3;
  std::vector<SampleTransition> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    const auto f = io::split(io::trim(line), ',');
    if (f.size() != n_agents + 3)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": wrong field count");
    SampleTransition xi;
    xi.s = std::stoul(f[1]);
    xi.s_next = std::stoul(f[2]);
    xi.local_rewards.resize(static_cast<Eigen::Index>(n_agents));
    for (std::size_t j = 0; j < n_agents; ++j)
      xi.local_rewards(static_cast<Eigen::Index>(j)) = io::parse_real(f[3 + j]);
    out.push_back(std::move(xi));
  }
  return out;
}

}  // namespace dhpd
