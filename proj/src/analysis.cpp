#include "dhpd/analysis.hpp"

#include "dhpd/io.hpp"
#include "dhpd/kernels.hpp"
#include "dhpd/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <sstream>

namespace dhpd {

namespace {

// Relative slack for inequalities that can be tight in exact arithmetic.
bool holds(double lhs, double rhs, double scale) {
  return lhs <= rhs + 1e-10 * std::max(1.0, std::abs(scale));
}

Matrix mean_columns(const Matrix& m) { return m.rowwise().mean(); }

}  // namespace

GapEvaluator::GapEvaluator(const SaddleModel& model)
    : model_(&model), solution_(saddle_solution(model)), c_llt_(model.C()) {
  const Matrix half = c_llt_.matrixL().solve(model.A());
  Matrix hessian = half.transpose() * half;
  hessian = 0.5 * (hessian + hessian.transpose()).eval();
  rho_cert_ = Eigen::SelfAdjointEigenSolver<Matrix>(hessian, Eigen::EigenvaluesOnly)
                  .eigenvalues()
                  .minCoeff();
}

double GapEvaluator::operator()(const Vector& x) const {
  const Vector r = model_->A() * (x - solution_.x);
  return 0.5 * c_llt_.matrixL().solve(r).squaredNorm();
}

double optimality_gap(const SaddleModel& model, const Vector& x_hat) {
  return GapEvaluator(model)(x_hat);
}

double surrogate_gap(const SaddleModel& model, const Vector& x_hat, const Matrix& y_hats) {
  if (static_cast<std::size_t>(y_hats.cols()) != model.n_agents())
    throw std::invalid_argument("surrogate_gap: need one dual column per agent");
  const Vector x_star = saddle_solution(model).x;
  double total = 0.0;
  for (std::size_t j = 0; j < model.n_agents(); ++j) {
    const Vector y_hat = y_hats.col(static_cast<Eigen::Index>(j));
    total += psi(model, j, x_hat, dual_maximizer(model, j, x_hat)) - psi(model, j, x_star, y_hat);
  }
  return total / static_cast<double>(model.n_agents());
}

GapReport gap_report(const SaddleModel& model, const Checkpoint& checkpoint) {
  const GapEvaluator gap(model);
  GapReport report;
  double surrogate = 0.0;
  for (Eigen::Index i = 0; i < checkpoint.x_hat.cols(); ++i) {
    const Vector x = checkpoint.x_hat.col(i);
    report.per_agent.push_back(gap(x));
    surrogate += surrogate_gap(model, x, checkpoint.y_hat);
  }
  const auto n = static_cast<double>(report.per_agent.size());
  for (double g : report.per_agent) report.eps += g / n;
  report.eps_surrogate = surrogate / n;
  return report;
}

std::size_t mixing_time_bound(double Gamma, double rho, double eps) {
  if (!(Gamma >= 1.0)) throw std::invalid_argument("mixing_time_bound: Gamma must be >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("mixing_time_bound: rho must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("mixing_time_bound: eps must be positive");
  if (rho == 0.0) return 1;
  const double steps = std::ceil(std::log(Gamma / eps) / std::abs(std::log(rho)));
  return steps > 0.0 ? static_cast<std::size_t>(steps) + 1 : 1;
}

BoundShape theorem_bound_shape(double G, double R, double L, double sigma2, std::size_t T,
                               std::size_t T1, std::size_t N, double Gamma, double rho) {
  if (!(G >= 0.0 && R >= 0.0 && L >= 0.0)) throw std::invalid_argument("G, R, L must be nonnegative");
  if (!(sigma2 >= 0.0 && sigma2 < 1.0)) throw std::invalid_argument("sigma2 must lie in [0, 1)");
  if (T < 1 || T1 < 1 || N < 1) throw std::invalid_argument("T, T1, N must be >= 1");
  BoundShape shape;
  const double t = static_cast<double>(T);
  const double lg = std::log(t * std::sqrt(static_cast<double>(N)));
  shape.term_network = G * (R * L + G) * lg * lg / (t * (1.0 - sigma2));
  shape.term_horizon = G * (G + R * L) * (1.0 + static_cast<double>(T1)) / t;
  shape.tau = mixing_time_bound(Gamma, rho, 1.0 / t);

  bool schedule_form = T % T1 == 0;
  if (schedule_form) {
    const std::size_t m = T / T1 + 1;
    schedule_form = (m & (m - 1)) == 0;
  }
  if (!schedule_form)
    shape.warnings.push_back("T = " + std::to_string(T) + " is not (2^K - 1) T1 for T1 = " +
                             std::to_string(T1));
  if (T1 < shape.tau)
    shape.warnings.push_back("T1 = " + std::to_string(T1) + " is below tau = " +
                             std::to_string(shape.tau));
  return shape;
}

void CheckReport::append(const CheckReport& other) {
  rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end());
}

bool CheckReport::passed() const { return failures() == 0; }

std::size_t CheckReport::failures() const {
  std::size_t n = 0;
  for (const auto& r : rows_) n += r.pass ? 0 : 1;
  return n;
}

std::string CheckReport::to_csv() const {
  std::string out = "check,round,agent,lhs,rhs,pass\n";
  for (const auto& r : rows_)
    out += r.check + ',' + std::to_string(r.round) + ',' + std::to_string(r.agent) + ',' +
           io::format_real(r.lhs) + ',' + io::format_real(r.rhs) + ',' + (r.pass ? "1" : "0") +
           '\n';
  return out;
}

std::string CheckReport::to_text() const {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // name -> (passed, total)
  std::vector<std::string> order;
  for (const auto& r : rows_) {
    auto [it, inserted] = counts.try_emplace(r.check, 0, 0);
    if (inserted) order.push_back(r.check);
    it->second.first += r.pass ? 1 : 0;
    it->second.second += 1;
  }
  std::ostringstream os;
  for (const auto& name : order) {
    const auto [ok, total] = counts[name];
    os << (ok == total ? "PASS " : "FAIL ") << name << " (" << ok << '/' << total << ")\n";
  }
  for (const auto& r : rows_)
    if (!r.pass)
      os << "  failed " << r.check << " round " << r.round << " agent " << r.agent << ": "
         << io::format_real(r.lhs) << " > " << io::format_real(r.rhs) << '\n';
  return os.str();
}

CheckReport verify_lemma1(const RunTrace& trace, const MixingMatrix& mixing, double radius_x,
                          double G) {
  if (trace.iterates.empty())
    throw std::invalid_argument("verify_lemma1: the run was executed without iterate logging");
  if (!(mixing.sigma2 < 1.0)) throw std::invalid_argument("verify_lemma1: sigma2 must be < 1");
  CheckReport report;
  const double n = static_cast<double>(mixing.W.rows());
  double eta_t_sum = 0.0;
  for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
    const RoundIterates& it = trace.iterates[k];
    const double t_k = static_cast<double>(it.x.size());
    eta_t_sum += it.eta * t_k;
    const double lg = std::log(std::sqrt(n) * t_k) / (1.0 - mixing.sigma2);
    const double delta = 2.0 * it.eta * G * lg + 4.0 * G / t_k * (lg + 1.0) * eta_t_sum +
                         2.0 * it.eta * G;

    const Eigen::Index agents = it.x.front().cols();
    Vector lhs = Vector::Zero(agents);
    for (std::size_t t = 0; t < it.x.size(); ++t) {
      const Vector x_bar = project_ball(mean_columns(it.x_lazy[t]), radius_x);
      for (Eigen::Index j = 0; j < agents; ++j) lhs(j) += (it.x[t].col(j) - x_bar).norm();
    }
    lhs /= t_k;
    for (Eigen::Index j = 0; j < agents; ++j)
      report.add({"consensus_error", k + 1, static_cast<std::size_t>(j) + 1, lhs(j), delta,
                  lhs(j) <= delta});
  }
  return report;
}

CheckReport verify_lemma2(std::size_t instances, std::uint64_t seed) {
  CheckReport report;
  Rng rng(seed);
  for (std::size_t inst = 0; inst < instances; ++inst) {
    const auto d = static_cast<Eigen::Index>(1 + rng.index(6));
    const std::size_t T = 1 + rng.index(200);
    const double radius = rng.uniform(0.1, 5.0);
    const double eta = std::exp(rng.uniform(std::log(1e-3), std::log(1.0)));
    const double scale = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    auto draw = [&](double r) {
      Vector v(d);
      for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
      return project_ball(v * r, radius);
    };
    const Vector u1 = draw(radius);
    const Vector u_star = draw(radius);
    std::vector<Vector> grads;
    for (std::size_t t = 0; t < T; ++t) {
      Vector g(d);
      for (Eigen::Index i = 0; i < d; ++i) g(i) = scale * rng.normal();
      grads.push_back(g);
    }
    const std::vector<Vector> path = lazy_projection_path(u1, grads, eta, radius);
    double lhs = 0.0, g2 = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      lhs += grads[t].dot(path[t] - u_star);
      g2 += grads[t].squaredNorm();
    }
    const double rhs = (u1 - u_star).squaredNorm() / (2.0 * eta) + 0.5 * eta * g2;
    report.add({"lazy_projection_regret", 0, inst + 1, lhs, rhs, holds(lhs, rhs, rhs)});
  }
  return report;
}

CheckReport verify_lemma3(double M, std::size_t T, std::size_t trials, std::uint64_t seed) {
  if (!(M > 0.0)) throw std::invalid_argument("verify_lemma3: M must be positive");
  if (T < 1) throw std::invalid_argument("verify_lemma3: T must be >= 1");
  if (trials < 100) throw std::invalid_argument("verify_lemma3: need at least 100 trials");
  constexpr Eigen::Index kDim = 3;
  Rng rng(seed);
  double mean_sq = 0.0;
  bool bounded = true;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Vector sum = Vector::Zero(kDim);
    for (std::size_t t = 0; t < T; ++t) {
      // Direction depends on the history through the running sum; the sign is
      // a fresh fair coin, so E[X(t) | past] = 0.
      Vector u(kDim);
      if (sum.norm() > 0.0 && rng.uniform() < 0.5) {
        u = sum.normalized();
      } else {
        for (Eigen::Index i = 0; i < kDim; ++i) u(i) = rng.normal();
        u.normalize();
      }
      const Vector x = M * rng.sign() * u;
      bounded = bounded && x.norm() <= M * (1.0 + 1e-12);
      sum += x;
    }
    mean_sq += (sum / static_cast<double>(T)).squaredNorm();
  }
  mean_sq /= static_cast<double>(trials);
  const double bound =
      4.0 * M * M / static_cast<double>(T) * (1.0 + 3.0 / std::sqrt(static_cast<double>(trials)));
  CheckReport report;
  report.add({"martingale_bounded_steps", 0, 0, bounded ? M : 2.0 * M, M, bounded});
  report.add({"martingale_mean_square", 0, 0, mean_sq, bound, mean_sq <= bound});
  return report;
}

CheckReport verify_gap_ordering(const SaddleModel& model, const RunTrace& trace) {
  const GapEvaluator gap(model);
  const PrimalDualPoint& star = gap.solution();
  const double rho_y = model.lambda_min_c();
  const auto n = static_cast<double>(model.n_agents());
  CheckReport report;
  for (const Checkpoint& cp : trace.checkpoints) {
    double dual_dist = 0.0;
    for (std::size_t j = 0; j < model.n_agents(); ++j)
      dual_dist += (star.y[j] - cp.y_hat.col(static_cast<Eigen::Index>(j))).squaredNorm();
    for (Eigen::Index i = 0; i < cp.x_hat.cols(); ++i) {
      const Vector x = cp.x_hat.col(i);
      const auto agent = static_cast<std::size_t>(i) + 1;
      const double eps = gap(x);
      const double eps_s = surrogate_gap(model, x, cp.y_hat);
      double star_dist = 0.0;
      for (std::size_t j = 0; j < model.n_agents(); ++j)
        star_dist += (star.y[j] - dual_maximizer(model, j, x)).squaredNorm();
      const double primal_lb = 0.5 * gap.rho_cert() * (star.x - x).squaredNorm();
      const double dual_lb = 0.5 * rho_y / n * dual_dist;
      const double star_lb = 0.5 * rho_y / n * star_dist;
      report.add({"gap_nonnegative", cp.round, agent, 0.0, eps, eps >= 0.0});
      report.add({"gap_below_surrogate", cp.round, agent, eps, eps_s, holds(eps, eps_s, eps_s)});
      report.add({"primal_quadratic_growth", cp.round, agent, primal_lb, eps,
                  holds(primal_lb, eps, eps)});
      report.add({"dual_quadratic_growth", cp.round, agent, dual_lb, eps_s,
                  holds(dual_lb, eps_s, eps_s)});
      report.add({"dual_maximizer_growth", cp.round, agent, star_lb, eps_s,
                  holds(star_lb, eps_s, eps_s)});
    }
  }
  return report;
}

CheckReport verify_gap_decomposition(const SaddleModel& model, const RunTrace& trace, double G) {
  if (trace.iterates.empty())
    throw std::invalid_argument("verify_gap_decomposition: the run was executed without iterate logging");
  const Vector x_star = saddle_solution(model).x;
  const std::size_t n = model.n_agents();
  CheckReport report;
  for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
    const RoundIterates& it = trace.iterates[k];
    const RoundOutput& out = trace.rounds.at(k);
    const double t_k = static_cast<double>(it.x.size());
    const auto agents = static_cast<std::size_t>(it.x.front().cols());

    // dist(t, j) = |x_j(t) - x_bar(t)|; psi_star(t, j) = psi_j(x*, y_j(t)).
    Matrix dist(it.x.size(), agents);
    double psi_star_sum = 0.0;
    for (std::size_t t = 0; t < it.x.size(); ++t) {
      const Vector x_bar = project_ball(mean_columns(it.x_lazy[t]), model.radius_x());
      for (std::size_t j = 0; j < agents; ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        dist(static_cast<Eigen::Index>(t), c) = (it.x[t].col(c) - x_bar).norm();
        psi_star_sum += psi(model, j, x_star, it.y[t].col(c));
      }
    }
    const double mean_dist = dist.sum() / (t_k * static_cast<double>(agents));

    for (std::size_t i = 0; i < agents; ++i) {
      const Vector x_hat = out.x_hat.col(static_cast<Eigen::Index>(i));
      std::vector<Vector> y_hat_star;
      for (std::size_t j = 0; j < n; ++j) y_hat_star.push_back(dual_maximizer(model, j, x_hat));
      double pdg = -psi_star_sum;
      for (std::size_t t = 0; t < it.x.size(); ++t)
        for (std::size_t j = 0; j < agents; ++j)
          pdg += psi(model, j, it.x[t].col(static_cast<Eigen::Index>(j)), y_hat_star[j]);
      pdg /= static_cast<double>(n) * t_k;
      const double net = G * (dist.col(static_cast<Eigen::Index>(i)).sum() / t_k + mean_dist);
      const double lhs = surrogate_gap(model, x_hat, out.y_hat);
      const double rhs = net + pdg;
      report.add({"surrogate_decomposition", k + 1, i + 1, lhs, rhs,
                  holds(lhs, rhs, std::abs(rhs) + std::abs(lhs))});
    }
  }
  return report;
}

CheckReport verify_schedule(const DhpdConfig& cfg, const RunTrace& trace) {
  CheckReport report;
  const double product = cfg.eta1 * static_cast<double>(cfg.T1);
  std::size_t iterations = 0;
  for (const RoundOutput& r : trace.rounds) {
    const double p = r.eta * static_cast<double>(r.horizon);
    report.add({"step_horizon_product", r.round, 0, p, product, p == product});
    iterations += r.horizon;
  }
  const auto expected = static_cast<double>(cfg.total_iterations());
  report.add({"total_iterations", 0, 0, static_cast<double>(iterations), expected,
              static_cast<double>(iterations) == expected});

  for (std::size_t k = 0; k < trace.iterates.size() && k + 1 < trace.rounds.size(); ++k) {
    const RoundIterates& it = trace.iterates[k];
    Matrix x_avg = Matrix::Zero(it.x.front().rows(), it.x.front().cols());
    Matrix y_avg = Matrix::Zero(it.y.front().rows(), it.y.front().cols());
    for (std::size_t t = 0; t < it.x.size(); ++t) {
      x_avg += it.x[t];
      y_avg += it.y[t];
    }
    x_avg /= static_cast<double>(it.x.size());
    y_avg /= static_cast<double>(it.y.size());
    const RoundOutput& r = trace.rounds[k];
    const double err = std::max({(r.next_x - x_avg).cwiseAbs().maxCoeff(),
                                 (r.next_x_lazy - x_avg).cwiseAbs().maxCoeff(),
                                 (r.next_y - y_avg).cwiseAbs().maxCoeff(),
                                 (r.next_y_lazy - y_avg).cwiseAbs().maxCoeff()});
    const Matrix& next_start = trace.iterates[k + 1].x.front();
    const double start_err = (next_start - r.next_x).cwiseAbs().maxCoeff();
    report.add({"restart_equals_average", r.round, 0, err, 1e-12, err <= 1e-12});
    report.add({"restart_used_next_round", r.round, 0, start_err, 0.0, start_err == 0.0});
  }
  return report;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loglog_slope: need at least two paired points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Matrix design(n, 2);
  Vector target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (!(x[u] > 0.0 && y[u] > 0.0)) throw std::invalid_argument("loglog_slope: values must be positive");
    design(i, 0) = 1.0;
    design(i, 1) = std::log(x[u]);
    target(i) = std::log(y[u]);
  }
  return design.colPivHouseholderQr().solve(target)(1);
}

}  // namespace dhpd
