#include "dhpd/solver.hpp"

#include "dhpd/io.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace dhpd {

namespace {

struct Round {
  double eta;
  std::size_t horizon;
};

std::vector<Round> homotopy_schedule(const DhpdConfig& cfg) {
  cfg.validate();
  std::vector<Round> rounds;
  for (std::size_t k = 1; k <= cfg.K; ++k) rounds.push_back({cfg.eta(k), cfg.horizon(k)});
  return rounds;
}

class CheckpointGrid {
 public:
  explicit CheckpointGrid(double growth) : growth_(growth) {
    if (!(growth > 1.0)) throw std::invalid_argument("checkpoint growth must exceed 1");
  }
  std::size_t current() const { return current_; }
  void advance() {
    const auto scaled = static_cast<std::size_t>(std::ceil(growth_ * static_cast<double>(current_)));
    current_ = std::max(current_ + 1, scaled);
  }

 private:
  double growth_;
  std::size_t current_ = 1;
};

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

void check_dimensions(const SaddleModel& model, const PolicyChain& chain,
                      const FeatureMap& features) {
  if (features.dim() != model.dim())
    throw std::invalid_argument("feature dimension does not match the model");
  if (features.n_states() != chain.n_states())
    throw std::invalid_argument("feature map and chain disagree on |S|");
  if (chain.n_agents() != model.n_agents())
    throw std::invalid_argument("chain and model disagree on the number of agents");
}

std::vector<double> evaluate_gaps(const GapOracle& gap, const Matrix& x_hat) {
  std::vector<double> out(static_cast<std::size_t>(x_hat.cols()),
                          std::numeric_limits<double>::quiet_NaN());
  if (!gap) return out;
  for (Eigen::Index j = 0; j < x_hat.cols(); ++j)
    out[static_cast<std::size_t>(j)] = gap(x_hat.col(j));
  return out;
}

void hypothesis_warnings(const DhpdConfig& cfg, const RunOptions& options, RunTrace& trace) {
  if (options.rho_x && options.rho_y) {
    const double threshold = 1.0 / (4.0 / *options.rho_y + 2.0 / *options.rho_x);
    if (cfg.eta1 < threshold)
      trace.warnings.push_back("eta1 = " + io::format_real(cfg.eta1) + " is below " +
                               io::format_real(threshold) +
                               " = 1 / (4 / rho_y + 2 / rho_x); the rate guarantee does not apply");
  }
  if (options.tau && cfg.T1 < *options.tau)
    trace.warnings.push_back("T1 = " + std::to_string(cfg.T1) + " is below the mixing time tau = " +
                             std::to_string(*options.tau));
}

RunTrace run_distributed(const SaddleModel& model, const PolicyChain& chain,
                         const FeatureMap& features, const MixingMatrix& mixing,
                         const std::vector<Round>& rounds, std::uint64_t seed,
                         const GapOracle& gap, const RunOptions& options) {
  check_dimensions(model, chain, features);
  const std::size_t n_agents = model.n_agents();
  if (static_cast<std::size_t>(mixing.W.rows()) != n_agents ||
      static_cast<std::size_t>(mixing.W.cols()) != n_agents)
    throw std::invalid_argument("mixing matrix size does not match the number of agents");
  if (options.threads < 1) throw std::invalid_argument("threads must be >= 1");

  const NeighborWeights neighbors = neighbor_weights(mixing.W);
  NetworkState cur(model.dim(), n_agents);
  NetworkState next = cur;
  MarkovSampler sampler(chain, seed, options.initial_state, options.noise);
  CheckpointGrid grid(options.checkpoint_growth);
  RunTrace trace;
  std::size_t samples = 0;

  auto log_checkpoint = [&](std::size_t round, std::size_t count) {
    Checkpoint cp;
    cp.samples = samples;
    cp.round = round;
    cp.x_hat = cur.x_sum / static_cast<double>(count);
    cp.y_hat = cur.y_sum / static_cast<double>(count);
    cp.gaps = evaluate_gaps(gap, cp.x_hat);
    trace.checkpoints.push_back(std::move(cp));
  };

  for (std::size_t k = 1; k <= rounds.size(); ++k) {
    const Round& round = rounds[k - 1];
    cur.x_sum = cur.x;
    cur.y_sum = cur.y;
    std::size_t count = 1;
    RoundIterates* history = nullptr;
    if (options.log_iterates) {
      trace.iterates.push_back({round.eta, {cur.x}, {cur.x_lazy}, {cur.y}});
      history = &trace.iterates.back();
    }

    for (std::size_t t = 1; t < round.horizon; ++t) {
      const SampleTransition xi = sampler.next();
      ++samples;
      const StepInputs in{&features, &neighbors,        model.gamma(), round.eta,
                          model.radius_x(), model.radius_y(), &xi};
      if (options.execution == Execution::parallel)
        kernels::step_parallel(in, cur, next, options.threads);
      else
        kernels::step_serial(in, cur, next);
      std::swap(cur, next);
      ++count;
      if (history) {
        history->x.push_back(cur.x);
        history->x_lazy.push_back(cur.x_lazy);
        history->y.push_back(cur.y);
      }
      if (samples == grid.current()) {
        log_checkpoint(k, count);
        grid.advance();
      }
    }

    if (trace.checkpoints.empty() || trace.checkpoints.back().samples != samples)
      log_checkpoint(k, count);

    RoundOutput out;
    out.round = k;
    out.eta = round.eta;
    out.horizon = round.horizon;
    out.samples_end = samples;
    out.x_hat = cur.x_sum / static_cast<double>(count);
    out.y_hat = cur.y_sum / static_cast<double>(count);
    cur.x = out.x_hat;
    cur.x_lazy = out.x_hat;
    cur.y = out.y_hat;
    cur.y_lazy = out.y_hat;
    if (k < rounds.size()) {
      out.next_x = cur.x;
      out.next_x_lazy = cur.x_lazy;
      out.next_y = cur.y;
      out.next_y_lazy = cur.y_lazy;
    }
    trace.rounds.push_back(std::move(out));
  }
  trace.total_samples = samples;
  return trace;
}

RunTrace run_centralized(const SaddleModel& model, const PolicyChain& chain,
                         const FeatureMap& features, const std::vector<Round>& rounds,
                         std::uint64_t seed, const GapOracle& gap, const RunOptions& options) {
  check_dimensions(model, chain, features);
  const auto d = static_cast<Eigen::Index>(model.dim());
  const auto n = static_cast<Eigen::Index>(model.n_agents());
  Vector x_lazy = Vector::Zero(d), x = Vector::Zero(d);
  Matrix y_lazy = Matrix::Zero(d, n), y = Matrix::Zero(d, n);
  MarkovSampler sampler(chain, seed, options.initial_state, options.noise);
  CheckpointGrid grid(options.checkpoint_growth);
  RunTrace trace;
  std::size_t samples = 0;
  Vector x_sum, gx_j(d), gx(d), gy_j(d);
  Matrix y_sum;

  auto log_checkpoint = [&](std::size_t round, std::size_t count) {
    Checkpoint cp;
    cp.samples = samples;
    cp.round = round;
    cp.x_hat = x_sum / static_cast<double>(count);
    cp.y_hat = y_sum / static_cast<double>(count);
    cp.gaps = evaluate_gaps(gap, cp.x_hat);
    trace.checkpoints.push_back(std::move(cp));
  };

  for (std::size_t k = 1; k <= rounds.size(); ++k) {
    const Round& round = rounds[k - 1];
    x_sum = x;
    y_sum = y;
    std::size_t count = 1;
    RoundIterates* history = nullptr;
    if (options.log_iterates) {
      trace.iterates.push_back({round.eta, {x}, {x_lazy}, {y}});
      history = &trace.iterates.back();
    }
    for (std::size_t t = 1; t < round.horizon; ++t) {
      const SampleTransition xi = sampler.next();
      ++samples;
      gx.setZero();
      Matrix y_next_lazy = y_lazy;
      for (Eigen::Index j = 0; j < n; ++j) {
        stochastic_gradient_into(features, model.gamma(), xi.local_rewards(j), x, y.col(j), xi.s,
                                 xi.s_next, gx_j, gy_j);
        gx += gx_j;
        y_next_lazy.col(j) += round.eta * gy_j;
      }
      gx /= static_cast<double>(n);
      x_lazy -= round.eta * gx;
      x = x_lazy;
      project_ball_inplace(x, model.radius_x());
      y_lazy = std::move(y_next_lazy);
      y = y_lazy;
      for (Eigen::Index j = 0; j < n; ++j) project_ball_inplace(y.col(j), model.radius_y());
      x_sum += x;
      y_sum += y;
      ++count;
      if (history) {
        history->x.push_back(x);
        history->x_lazy.push_back(x_lazy);
        history->y.push_back(y);
      }
      if (samples == grid.current()) {
        log_checkpoint(k, count);
        grid.advance();
      }
    }
    if (trace.checkpoints.empty() || trace.checkpoints.back().samples != samples)
      log_checkpoint(k, count);

    RoundOutput out;
    out.round = k;
    out.eta = round.eta;
    out.horizon = round.horizon;
    out.samples_end = samples;
    out.x_hat = x_sum / static_cast<double>(count);
    out.y_hat = y_sum / static_cast<double>(count);
    x = out.x_hat;
    x_lazy = x;
    y = out.y_hat;
    y_lazy = y;
    if (k < rounds.size()) {
      out.next_x = x;
      out.next_x_lazy = x_lazy;
      out.next_y = y;
      out.next_y_lazy = y_lazy;
    }
    trace.rounds.push_back(std::move(out));
  }
  trace.total_samples = samples;
  return trace;
}

}  // namespace

void DhpdConfig::validate() const {
  if (!(eta1 > 0.0)) throw std::invalid_argument("eta1 must be positive");
  if (T1 < 1) throw std::invalid_argument("T1 must be >= 1");
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (K > 40) throw std::invalid_argument("K must be <= 40");
}

AgentState agent_state(const NetworkState& state, std::size_t j) {
  const auto c = static_cast<Eigen::Index>(j);
  return {state.x_lazy.col(c), state.x.col(c),     state.y_lazy.col(c),
          state.y.col(c),      state.x_sum.col(c), state.y_sum.col(c)};
}

double Checkpoint::mean_gap() const {
  if (gaps.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
}

bool RunTrace::operator==(const RunTrace& o) const {
  if (total_samples != o.total_samples || checkpoints.size() != o.checkpoints.size() ||
      rounds.size() != o.rounds.size() || warnings != o.warnings ||
      iterates.size() != o.iterates.size())
    return false;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const auto &a = checkpoints[i], &b = o.checkpoints[i];
    if (a.samples != b.samples || a.round != b.round || !same(a.x_hat, b.x_hat) ||
        !same(a.y_hat, b.y_hat) || a.gaps.size() != b.gaps.size())
      return false;
    for (std::size_t j = 0; j < a.gaps.size(); ++j)
      if (!(a.gaps[j] == b.gaps[j] || (std::isnan(a.gaps[j]) && std::isnan(b.gaps[j]))))
        return false;
  }
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    const auto &a = rounds[i], &b = o.rounds[i];
    if (a.round != b.round || a.eta != b.eta || a.horizon != b.horizon ||
        a.samples_end != b.samples_end || !same(a.x_hat, b.x_hat) || !same(a.y_hat, b.y_hat) ||
        !same(a.next_x, b.next_x) || !same(a.next_y, b.next_y))
      return false;
  }
  for (std::size_t i = 0; i < iterates.size(); ++i) {
    const auto &a = iterates[i], &b = o.iterates[i];
    if (a.eta != b.eta || a.x.size() != b.x.size()) return false;
    for (std::size_t t = 0; t < a.x.size(); ++t)
      if (!same(a.x[t], b.x[t]) || !same(a.x_lazy[t], b.x_lazy[t]) || !same(a.y[t], b.y[t]))
        return false;
  }
  return true;
}

Vector running_average(const Vector& accumulator, std::size_t count) {
  if (count == 0) throw std::invalid_argument("running_average: count must be >= 1");
  return accumulator / static_cast<double>(count);
}

RunTrace dhpd_run(const SaddleModel& model, const PolicyChain& chain,
                  const FeatureMap& features, const MixingMatrix& mixing, const DhpdConfig& cfg,
                  const GapOracle& gap, const RunOptions& options) {
  RunTrace trace = run_distributed(model, chain, features, mixing, homotopy_schedule(cfg),
                                   cfg.seed, gap, options);
  hypothesis_warnings(cfg, options, trace);
  return trace;
}

RunTrace spd_run_distributed(const SaddleModel& model, const PolicyChain& chain,
                             const FeatureMap& features, const MixingMatrix& mixing, double eta,
                             std::size_t T, std::uint64_t seed, const GapOracle& gap,
                             const RunOptions& options) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  return run_distributed(model, chain, features, mixing, {{eta, T}}, seed, gap, options);
}

RunTrace spd_run_centralized(const SaddleModel& model, const PolicyChain& chain,
                             const FeatureMap& features, double eta, std::size_t T,
                             std::uint64_t seed, const GapOracle& gap,
                             const RunOptions& options) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  return run_centralized(model, chain, features, {{eta, T}}, seed, gap, options);
}

RunTrace centralized_homotopy_run(const SaddleModel& model, const PolicyChain& chain,
                                  const FeatureMap& features, const DhpdConfig& cfg,
                                  const GapOracle& gap, const RunOptions& options) {
  RunTrace trace =
      run_centralized(model, chain, features, homotopy_schedule(cfg), cfg.seed, gap, options);
  hypothesis_warnings(cfg, options, trace);
  return trace;
}

std::vector<Vector> lazy_projection_path(const Vector& u1, const std::vector<Vector>& grads,
                                         double eta, double radius) {
  if (u1.norm() > radius * (1.0 + 1e-12))
    throw std::invalid_argument("lazy_projection_path: u(1) must lie in the ball");
  std::vector<Vector> path{u1};
  Vector w = u1;
  for (std::size_t t = 0; t + 1 < grads.size(); ++t) {
    w -= eta * grads[t];
    path.push_back(project_ball(w, radius));
  }
  return path;
}

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace) {
  std::string text = "samples,agent,gap\n";
  for (const auto& cp : trace.checkpoints)
    for (std::size_t j = 0; j < cp.gaps.size(); ++j)
      text += std::to_string(cp.samples) + ',' + std::to_string(j + 1) + ',' +
              io::format_real(cp.gaps[j]) + '\n';
  io::write_file(path, text);
}

}  // namespace dhpd
