#include "dhpd/objective.hpp"

#include "dhpd/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace dhpd {

namespace {

double spectral_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

Vector mean_of(const std::vector<Vector>& vs) {
  Vector m = Vector::Zero(vs.front().size());
  for (const auto& v : vs) m += v;
  return m / static_cast<double>(vs.size());
}

SaddleModel with_radii(Matrix a, Matrix c, std::vector<Vector> b_locals, double gamma,
                       const RadiiPolicy& policy) {
  if (a.rows() == 0 || a.rows() != a.cols())
    throw std::invalid_argument("A must be square and nonempty");
  Eigen::JacobiSVD<Matrix> svd_a(a);
  const auto& sv = svd_a.singularValues();
  if (!(sv(sv.size() - 1) > 1e-12 * sv(0)))
    throw AssumptionError("A must be full rank (features or chain are degenerate)");
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success)
    throw AssumptionError("C must be symmetric positive definite");

  double radius_x = 0.0;
  if (policy.primal_radius) {
    radius_x = *policy.primal_radius;
  } else {
    const double xstar_norm = Eigen::PartialPivLU<Matrix>(a).solve(mean_of(b_locals)).norm();
    radius_x = xstar_norm > 0.0 ? policy.primal_factor * xstar_norm : 1.0;
  }
  const double radius_y =
      policy.dual_radius ? *policy.dual_radius
                         : policy.dual_factor * SaddleModel::required_dual_radius(
                                                    a, min_eigenvalue(c), b_locals, radius_x);
  return SaddleModel(std::move(a), std::move(c), std::move(b_locals), gamma, radius_x,
                     radius_y);
}

}  // namespace

double SaddleModel::required_dual_radius(const Matrix& a, double lambda_min_c,
                                         const std::vector<Vector>& b_locals,
                                         double radius_x) {
  const double norm_a = spectral_norm(a);
  double worst = 0.0;
  for (const auto& bj : b_locals) worst = std::max(worst, norm_a * radius_x + bj.norm());
  return worst / lambda_min_c;
}

SaddleModel::SaddleModel(Matrix a, Matrix c, std::vector<Vector> b_locals, double gamma,
                         double radius_x, double radius_y)
    : a_(std::move(a)),
      c_(std::move(c)),
      b_locals_(std::move(b_locals)),
      gamma_(gamma),
      radius_x_(radius_x),
      radius_y_(radius_y) {
  const auto d = a_.rows();
  if (d == 0 || a_.cols() != d || c_.rows() != d || c_.cols() != d)
    throw std::invalid_argument("A and C must be d x d");
  if (b_locals_.empty()) throw std::invalid_argument("need at least one agent");
  for (const auto& bj : b_locals_)
    if (bj.size() != d) throw std::invalid_argument("b_j must have length d");
  if (!(radius_x_ > 0.0) || !(radius_y_ > 0.0))
    throw std::invalid_argument("ball radii must be positive");
  if (!a_.allFinite() || !c_.allFinite()) throw std::invalid_argument("non-finite model entries");

  Eigen::JacobiSVD<Matrix> svd_a(a_);
  const auto& sv = svd_a.singularValues();
  if (!(sv(d - 1) > 1e-12 * sv(0)))
    throw AssumptionError("A must be full rank (features or chain are degenerate)");
  norm_a_ = sv(0);

  if ((c_ - c_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, c_.cwiseAbs().maxCoeff()))
    throw AssumptionError("C must be symmetric positive definite (C is not symmetric)");
  c_llt_.compute(c_);
  lambda_min_c_ = min_eigenvalue(c_);
  if (c_llt_.info() != Eigen::Success || !(lambda_min_c_ > 0.0))
    throw AssumptionError("C must be symmetric positive definite");

  a_lu_.compute(a_);
  b_ = mean_of(b_locals_);

  const double needed = required_dual_radius(a_, lambda_min_c_, b_locals_, radius_x_);
  if (radius_y_ < needed * (1.0 - 1e-12))
    throw AssumptionError("dual radius " + io::format_real(radius_y_) +
                          " cannot contain every dual maximizer (needs " +
                          io::format_real(needed) + ")");
}

SaddleModel population_model(const PolicyChain& chain, const FeatureMap& features,
                             const RadiiPolicy& radii) {
  if (features.n_states() != chain.n_states())
    throw std::invalid_argument("feature map and chain disagree on |S|");
  const Vector pi = stationary_distribution(chain);
  const Matrix& phi = features.phi();
  const auto n = static_cast<Eigen::Index>(chain.n_states());
  const Matrix d_phi = pi.asDiagonal() * phi;
  const Matrix m = Matrix::Identity(n, n) - chain.gamma() * chain.transition();
  Matrix a = phi.transpose() * (pi.asDiagonal() * (m * phi));
  Matrix c = phi.transpose() * d_phi;
  c = 0.5 * (c + c.transpose()).eval();
  std::vector<Vector> b_locals;
  for (std::size_t j = 0; j < chain.n_agents(); ++j)
    b_locals.push_back(d_phi.transpose() *
                       chain.rewards().row(static_cast<Eigen::Index>(j)).transpose());
  return with_radii(std::move(a), std::move(c), std::move(b_locals), chain.gamma(), radii);
}

EmpiricalMoments empirical_moments(const std::vector<SampleTransition>& dataset,
                                   const FeatureMap& features, double gamma) {
  if (dataset.empty()) throw std::invalid_argument("empirical_moments: empty dataset");
  const auto d = static_cast<Eigen::Index>(features.dim());
  const auto n_agents = dataset.front().local_rewards.size();

  // A and C depend on the data only through transition counts, so they are
  // accumulated from integer counts and divided once.
  std::map<std::pair<std::size_t, std::size_t>, long> pair_counts;
  std::map<std::size_t, Vector> reward_sums;
  for (const auto& xi : dataset) {
    if (xi.s >= features.n_states() || xi.s_next >= features.n_states())
      throw std::invalid_argument("empirical_moments: state index out of range");
    if (xi.local_rewards.size() != n_agents)
      throw std::invalid_argument("empirical_moments: inconsistent agent count");
    ++pair_counts[{xi.s, xi.s_next}];
    auto [it, inserted] = reward_sums.try_emplace(xi.s, Vector::Zero(n_agents));
    it->second += xi.local_rewards;
  }
  const double total = static_cast<double>(dataset.size());
  Matrix a = Matrix::Zero(d, d);
  Matrix c = Matrix::Zero(d, d);
  for (const auto& [pair, count] : pair_counts) {
    const double w = static_cast<double>(count) / total;
    const Vector phi_s = features.row(pair.first);
    const Vector td = phi_s - gamma * features.row(pair.second);
    a += w * phi_s * td.transpose();
    c += w * phi_s * phi_s.transpose();
  }
  std::vector<Vector> b_locals(static_cast<std::size_t>(n_agents), Vector::Zero(d));
  for (const auto& [s, sums] : reward_sums) {
    const Vector phi_s = features.row(s);
    for (Eigen::Index j = 0; j < n_agents; ++j)
      b_locals[static_cast<std::size_t>(j)] += (sums(j) / total) * phi_s;
  }
  return {std::move(a), std::move(c), std::move(b_locals)};
}

SaddleModel empirical_model(const std::vector<SampleTransition>& dataset,
                            const FeatureMap& features, double gamma, const RadiiPolicy& radii) {
  EmpiricalMoments m = empirical_moments(dataset, features, gamma);
  Eigen::LLT<Matrix> llt(m.C);
  if (llt.info() != Eigen::Success || min_eigenvalue(m.C) <= 0.0)
    throw AssumptionError("empirical C is singular: dataset too small or degenerate");
  return with_radii(std::move(m.A), std::move(m.C), std::move(m.b_locals), gamma, radii);
}

double mspbe(const SaddleModel& model, const Vector& x) {
  const Vector r = model.A() * x - model.b();
  return 0.5 * r.dot(model.solve_c(r));
}

double local_mspbe(const SaddleModel& model, std::size_t j, const Vector& x) {
  const Vector r = model.A() * x - model.b_local(j);
  return 0.5 * r.dot(model.solve_c(r));
}

double mean_local_mspbe(const SaddleModel& model, const Vector& x) {
  double acc = 0.0;
  for (std::size_t j = 0; j < model.n_agents(); ++j) acc += local_mspbe(model, j, x);
  return acc / static_cast<double>(model.n_agents());
}

double psi(const SaddleModel& model, std::size_t j, const Vector& x, const Vector& y) {
  return y.dot(model.A() * x - model.b_local(j)) - 0.5 * y.dot(model.C() * y);
}

GradientPair population_gradient(const SaddleModel& model, std::size_t j, const Vector& x,
                                 const Vector& y) {
  return {model.A().transpose() * y, model.A() * x - model.b_local(j) - model.C() * y};
}

void stochastic_gradient_into(const FeatureMap& features, double gamma, double reward,
                              const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                              std::size_t s, std::size_t s_next, Eigen::Ref<Vector> gx,
                              Eigen::Ref<Vector> gy) {
  const auto phi_s = features.phi().row(static_cast<Eigen::Index>(s));
  const auto phi_next = features.phi().row(static_cast<Eigen::Index>(s_next));
  const double phi_dot_y = phi_s.dot(y);
  // td_x = (phi(s) - gamma phi(s'))^T x
  const double td_x = phi_s.dot(x) - gamma * phi_next.dot(x);
  gx = phi_dot_y * (phi_s - gamma * phi_next).transpose();
  gy = (td_x - reward - phi_dot_y) * phi_s.transpose();
}

GradientPair stochastic_gradient(const FeatureMap& features, double gamma, std::size_t j,
                                 const Vector& x, const Vector& y, const SampleTransition& xi) {
  const auto d = static_cast<Eigen::Index>(features.dim());
  if (x.size() != d || y.size() != d)
    throw std::invalid_argument("stochastic_gradient: dimension mismatch");
  GradientPair g{Vector(d), Vector(d)};
  stochastic_gradient_into(features, gamma, xi.local_rewards(static_cast<Eigen::Index>(j)), x, y,
                           xi.s, xi.s_next, g.gx, g.gy);
  return g;
}

PrimalDualPoint saddle_solution(const SaddleModel& model) {
  PrimalDualPoint p;
  p.x = model.solve_a(model.b());
  if (p.x.norm() > model.radius_x())
    throw std::domain_error("minimizer lies outside the primal ball; enlarge R_x");
  for (std::size_t j = 0; j < model.n_agents(); ++j)
    p.y.push_back(model.solve_c(model.A() * p.x - model.b_local(j)));
  return p;
}

Vector dual_maximizer(const SaddleModel& model, std::size_t j, const Vector& x) {
  Vector y = model.solve_c(model.A() * x - model.b_local(j));
  const double norm = y.norm();
  if (norm > model.radius_y()) y *= model.radius_y() / norm;
  return y;
}

ProblemConstants constants(const SaddleModel& model, const FeatureBounds& bounds,
                           double lambda_reg) {
  ProblemConstants k;
  k.lambda_reg = lambda_reg;
  k.rho_y = model.lambda_min_c();
  k.rho_x_formula = 2.0 * lambda_reg + model.norm_a() * model.norm_a() / model.lambda_min_c();
  Matrix c_inv_a(model.dim(), model.dim());
  for (Eigen::Index col = 0; col < model.A().cols(); ++col)
    c_inv_a.col(col) = model.solve_c(model.A().col(col));
  Matrix hessian = model.A().transpose() * c_inv_a;
  hessian = 0.5 * (hessian + hessian.transpose()).eval();
  k.rho_cert = min_eigenvalue(hessian);

  k.R = std::max(model.radius_x(), model.radius_y());
  const double b0 = bounds.beta0, b1 = bounds.beta1, b2 = bounds.beta2;
  const double lam2 = lambda_reg * lambda_reg;
  k.G_formula = std::sqrt((2.0 * b1 * b1 + b2 * b2 + 4.0 * lam2) * k.R * k.R + b0 * b0);
  // |g_x| <= b1 R_y and |g_y| <= b1 R_x + b0 + b2 R_y for every sample.
  const double gx = b1 * model.radius_y();
  const double gy = b1 * model.radius_x() + b0 + b2 * model.radius_y();
  k.G = std::max(k.G_formula, std::sqrt(gx * gx + gy * gy));
  k.L = std::max(std::sqrt(b1 * b1 + b2 * b2), std::sqrt(4.0 * lam2 + b1 * b1));
  return k;
}

void save_model(const std::filesystem::path& dir, const SaddleModel& model) {
  std::filesystem::create_directories(dir);
  io::write_matrix_csv(dir / "A.csv", model.A());
  io::write_matrix_csv(dir / "C.csv", model.C());
  Matrix b(static_cast<Eigen::Index>(model.n_agents()), static_cast<Eigen::Index>(model.dim()));
  for (std::size_t j = 0; j < model.n_agents(); ++j)
    b.row(static_cast<Eigen::Index>(j)) = model.b_local(j).transpose();
  io::write_matrix_csv(dir / "b_j.csv", b);
  io::write_key_values(dir / "meta.txt", {{"gamma", io::format_real(model.gamma())},
                                          {"radius_x", io::format_real(model.radius_x())},
                                          {"radius_y", io::format_real(model.radius_y())},
                                          {"n_agents", std::to_string(model.n_agents())},
                                          {"dim", std::to_string(model.dim())}});
}

SaddleModel load_model(const std::filesystem::path& dir) {
  const auto meta = io::read_key_values(dir / "meta.txt");
  auto field = [&](const std::string& key) {
    const auto it = meta.find(key);
    if (it == meta.end()) throw std::runtime_error((dir / "meta.txt").string() + ": missing " + key);
    return it->second;
  };
  Matrix a = io::read_matrix_csv(dir / "A.csv");
  Matrix c = io::read_matrix_csv(dir / "C.csv");
  const Matrix b = io::read_matrix_csv(dir / "b_j.csv");
  const auto n_agents = std::stoul(field("n_agents"));
  const auto d = std::stoul(field("dim"));
  if (static_cast<std::size_t>(b.rows()) != n_agents || static_cast<std::size_t>(b.cols()) != d ||
      static_cast<std::size_t>(a.rows()) != d)
    throw std::runtime_error(dir.string() + ": model files disagree with meta.txt");
  std::vector<Vector> b_locals;
  for (Eigen::Index j = 0; j < b.rows(); ++j) b_locals.push_back(b.row(j).transpose());
  return SaddleModel(std::move(a), std::move(c), std::move(b_locals),
                     io::parse_real(field("gamma")), io::parse_real(field("radius_x")),
                     io::parse_real(field("radius_y")));
}

}  // namespace dhpd
