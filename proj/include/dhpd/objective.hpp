#pragma once

#include "dhpd/chain.hpp"
#include "dhpd/features.hpp"
#include "dhpd/types.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace dhpd {

/// How the primal and dual ball radii are chosen. With no explicit radius,
/// R_x = primal_factor * ||A^{-1} b|| (1 when that norm is zero) and
/// R_y = dual_factor * max_j (||A|| R_x + ||b_j||) / lambda_min(C), which keeps
/// every Fenchel maximizer C^{-1}(Ax - b_j) strictly inside the dual ball.
struct RadiiPolicy {
  double primal_factor = 2.0;
  double dual_factor = 1.5;
  std::optional<double> primal_radius;
  std::optional<double> dual_radius;
};

/// The MSPBE saddle problem
///   min_{|x| <= R_x} max_{|y_j| <= R_y} (1/N) sum_j y_j^T (A x - b_j) - y_j^T C y_j / 2.
/// Immutable; C^{-1} is only ever applied through a Cholesky factorization.
class SaddleModel {
 public:
  /// Throws AssumptionError if A is rank deficient, C is not symmetric
  /// positive definite, or R_y is too small to contain every dual maximizer.
  SaddleModel(Matrix a, Matrix c, std::vector<Vector> b_locals, double gamma, double radius_x,
              double radius_y);

  const Matrix& A() const { return a_; }
  const Matrix& C() const { return c_; }
  const std::vector<Vector>& b_locals() const { return b_locals_; }
  const Vector& b_local(std::size_t j) const { return b_locals_.at(j); }
  const Vector& b() const { return b_; }
  double gamma() const { return gamma_; }
  double radius_x() const { return radius_x_; }
  double radius_y() const { return radius_y_; }
  std::size_t n_agents() const { return b_locals_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(a_.rows()); }

  Vector solve_c(const Vector& v) const { return c_llt_.solve(v); }
  Vector solve_a(const Vector& v) const { return a_lu_.solve(v); }
  double lambda_min_c() const { return lambda_min_c_; }
  double norm_a() const { return norm_a_; }

  /// Smallest R_y for which the dual maximizer is interior for all |x| <= R_x
  /// (computed with the bound sup ||Ax - b_j|| <= ||A|| R_x + ||b_j||).
  static double required_dual_radius(const Matrix& a, double lambda_min_c,
                                     const std::vector<Vector>& b_locals, double radius_x);

 private:
  Matrix a_;
  Matrix c_;
  std::vector<Vector> b_locals_;
  Vector b_;
  double gamma_;
  double radius_x_;
  double radius_y_;
  Eigen::LLT<Matrix> c_llt_;
  Eigen::PartialPivLU<Matrix> a_lu_;
  double lambda_min_c_ = 0.0;
  double norm_a_ = 0.0;
};

struct PrimalDualPoint {
  Vector x;
  std::vector<Vector> y;  // one dual block per agent
};

struct GradientPair {
  Vector gx;
  Vector gy;
};

/// Moduli and gradient bounds. `rho_x_formula` and `G_formula` are the closed
/// forms in terms of (beta0, beta1, beta2, R, lambda_reg); `rho_cert` is the
/// exact strong-convexity modulus lambda_min(A^T C^{-1} A) of every f_j, and
/// `G` is max(G_formula, a bound every sampled gradient provably obeys).
struct ProblemConstants {
  double rho_x_formula = 0.0;
  double rho_cert = 0.0;
  double rho_y = 0.0;
  double G_formula = 0.0;
  double G = 0.0;
  double L = 0.0;
  double R = 0.0;
  double lambda_reg = 0.0;
};

SaddleModel population_model(const PolicyChain& chain, const FeatureMap& features,
                             const RadiiPolicy& radii = {});

struct EmpiricalMoments {
  Matrix A;
  Matrix C;
  std::vector<Vector> b_locals;
};

/// Sample averages of A(xi), C(xi) and b_j(xi); no invertibility required.
EmpiricalMoments empirical_moments(const std::vector<SampleTransition>& dataset,
                                   const FeatureMap& features, double gamma);

/// Flat sample averages over the dataset, pairing phi(s) with phi(s_next) of
/// the same transition.
SaddleModel empirical_model(const std::vector<SampleTransition>& dataset,
                            const FeatureMap& features, double gamma,
                            const RadiiPolicy& radii = {});

/// f(x) = 0.5 (Ax - b)^T C^{-1} (Ax - b).
double mspbe(const SaddleModel& model, const Vector& x);
/// f_j(x), same form with b_j.
double local_mspbe(const SaddleModel& model, std::size_t j, const Vector& x);
/// (1/N) sum_j f_j(x); differs from mspbe() by an x-independent constant.
double mean_local_mspbe(const SaddleModel& model, const Vector& x);

double psi(const SaddleModel& model, std::size_t j, const Vector& x, const Vector& y);

/// Exact gradients of psi_j: (A^T y, A x - b_j - C y).
GradientPair population_gradient(const SaddleModel& model, std::size_t j, const Vector& x,
                                 const Vector& y);

/// Single-sample gradients with A(xi) = phi(s)(phi(s) - gamma phi(s'))^T,
/// b_j(xi) = r_j phi(s), C(xi) = phi(s) phi(s)^T. O(d).
GradientPair stochastic_gradient(const FeatureMap& features, double gamma, std::size_t j,
                                 const Vector& x, const Vector& y, const SampleTransition& xi);

/// In-place variant used by the solver kernels; no allocation.
void stochastic_gradient_into(const FeatureMap& features, double gamma, double reward,
                              const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                              std::size_t s, std::size_t s_next, Eigen::Ref<Vector> gx,
                              Eigen::Ref<Vector> gy);

/// x* = A^{-1} b, y_j* = C^{-1}(b - b_j). Throws std::domain_error if x* lies
/// outside the primal ball.
PrimalDualPoint saddle_solution(const SaddleModel& model);

/// Maximizer of psi_j(x, .) over the dual ball.
Vector dual_maximizer(const SaddleModel& model, std::size_t j, const Vector& x);

ProblemConstants constants(const SaddleModel& model, const FeatureBounds& bounds,
                           double lambda_reg = 0.0);

/// Writes A.csv, C.csv, b_j.csv (one row per agent) and meta.txt.
void save_model(const std::filesystem::path& dir, const SaddleModel& model);
SaddleModel load_model(const std::filesystem::path& dir);

}  // namespace dhpd
