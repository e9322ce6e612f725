#pragma once

#include "dhpd/network.hpp"
#include "dhpd/objective.hpp"
#include "dhpd/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dhpd {

struct GapReport {
  double eps = 0.0;            // mean over agents of eps(x_hat_i)
  double eps_surrogate = 0.0;  // mean over agents of eps'(x_hat_i, y_hat)
  std::vector<double> per_agent;
};

/// Rate bound with unit constants.
struct BoundShape {
  double term_network = 0.0;
  double term_horizon = 0.0;
  std::size_t tau = 1;
  std::vector<std::string> warnings;
  double total() const { return term_network + term_horizon; }
};

/// Caches x* and its quadratic form so gaps are cheap at every checkpoint.
/// gap(x) = (1/N) sum_j (f_j(x) - f_j(x*)) = 0.5 |L^{-1} A (x - x*)|^2 with
/// C = L L^T, which is the same quantity without cancellation.
class GapEvaluator {
 public:
  explicit GapEvaluator(const SaddleModel& model);
  double operator()(const Vector& x) const;
  const PrimalDualPoint& solution() const { return solution_; }
  /// lambda_min(A^T C^{-1} A).
  double rho_cert() const { return rho_cert_; }

 private:
  const SaddleModel* model_;
  PrimalDualPoint solution_;
  Eigen::LLT<Matrix> c_llt_;
  double rho_cert_ = 0.0;
};

double optimality_gap(const SaddleModel& model, const Vector& x_hat);

/// (1/N) sum_j (psi_j(x_hat, y*_j(x_hat)) - psi_j(x*, y_hat_j)) where y*_j(x_hat)
/// maximizes psi_j(x_hat, .) over the dual ball. `y_hats` has one column per agent.
double surrogate_gap(const SaddleModel& model, const Vector& x_hat, const Matrix& y_hats);

/// Gap report for a checkpoint (per-agent optimality gaps, mean surrogate).
GapReport gap_report(const SaddleModel& model, const Checkpoint& checkpoint);

/// ceil(log(Gamma / eps) / |log rho|) + 1, floored at 1. rho = 0 means the
/// chain is stationary after one step and returns 1.
std::size_t mixing_time_bound(double Gamma, double rho, double eps);

/// term_network = G (R L + G) log^2(T sqrt N) / (T (1 - sigma2)),
/// term_horizon = G (G + R L)(1 + T1) / T, tau = mixing_time_bound(Gamma, rho, 1/T).
/// A T that is not (2^K - 1) T1, or T1 < tau, only adds a warning.
BoundShape theorem_bound_shape(double G, double R, double L, double sigma2, std::size_t T,
                               std::size_t T1, std::size_t N, double Gamma, double rho);

struct CheckRow {
  std::string check;
  std::size_t round = 0;  // 0 when not tied to a round
  std::size_t agent = 0;  // 1-based, 0 when not tied to an agent
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

class CheckReport {
 public:
  void add(CheckRow row) { rows_.push_back(std::move(row)); }
  void append(const CheckReport& other);
  const std::vector<CheckRow>& rows() const { return rows_; }
  bool passed() const;
  std::size_t failures() const;
  /// `check,round,agent,lhs,rhs,pass`.
  std::string to_csv() const;
  /// One line per check name with counts, then every failing row.
  std::string to_text() const;

 private:
  std::vector<CheckRow> rows_;
};

/// Consensus error of each agent against x_bar(t) = P_X(mean_j x'_j(t)),
/// per round, compared with the three-term network bound. Needs iterates.
CheckReport verify_lemma1(const RunTrace& trace, const MixingMatrix& mixing, double radius_x,
                          double G);

/// Online gradient inequality for lazy projections on random instances.
CheckReport verify_lemma2(std::size_t instances, std::uint64_t seed);

/// Monte Carlo estimate of E|(1/T) sum X(t)|^2 for bounded martingale
/// differences X(t) = M e(t) u(t), with e(t) a fair sign and u(t) a unit
/// vector chosen from the past, against 4 M^2 / T (1 + 3 / sqrt(trials)).
CheckReport verify_lemma3(double M, std::size_t T, std::size_t trials, std::uint64_t seed);

/// At every checkpoint and agent: 0 <= eps <= eps' and the three quadratic
/// lower bounds (primal with rho_cert, dual with lambda_min(C)).
CheckReport verify_gap_ordering(const SaddleModel& model, const RunTrace& trace);

/// eps'(x_hat_i, y_hat) <= NET + PDG for every round and agent. Needs iterates.
CheckReport verify_gap_decomposition(const SaddleModel& model, const RunTrace& trace, double G);

/// eta_k T_k constant, total iterations (2^K - 1) T1, and restarts equal to
/// round averages recomputed from the iterate log.
CheckReport verify_schedule(const DhpdConfig& cfg, const RunTrace& trace);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dhpd
