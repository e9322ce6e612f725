#include "dhpd/analysis.hpp"

#include "dhpd/rng.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace dhpd;

namespace {

struct Problem {
  PolicyChain chain;
  FeatureMap features;
  SaddleModel model;
};

Problem make_problem(std::size_t n_states, std::size_t d, std::size_t agents, std::uint64_t seed) {
  PolicyChain chain = random_ergodic_chain(n_states, agents, 3, seed, 0.9);
  FeatureMap features = random_features(n_states, d, seed + 1);
  SaddleModel model = population_model(chain, features);
  return {std::move(chain), std::move(features), std::move(model)};
}

Vector random_vector(Rng& rng, Eigen::Index d, double radius) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
  return v.normalized() * radius * rng.uniform();
}

}  // namespace

TEST(OptimalityGap, ZeroAtMinimizerAndMatchesDefinition) {
  const Problem p = make_problem(20, 5, 4, 1);
  const GapEvaluator gap(p.model);
  EXPECT_NEAR(gap(gap.solution().x), 0.0, 1e-20);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const Vector x = random_vector(rng, 5, p.model.radius_x());
    double direct = 0.0;
    for (std::size_t j = 0; j < 4; ++j)
      direct += (local_mspbe(p.model, j, x) - local_mspbe(p.model, j, gap.solution().x)) / 4.0;
    EXPECT_NEAR(gap(x), direct, 1e-12);
    EXPECT_GE(gap(x), 0.0);
    EXPECT_EQ(optimality_gap(p.model, x), gap(x));
  }
}

TEST(OptimalityGap, QuadraticGrowthWithCertifiedModulus) {
  const Problem p = make_problem(25, 6, 3, 3);
  const GapEvaluator gap(p.model);
  const Matrix h = p.model.A().transpose() * p.model.C().inverse() * p.model.A();
  const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (h + h.transpose())).eigenvalues()(0);
  EXPECT_NEAR(gap.rho_cert(), lmin, 1e-10);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Vector x = random_vector(rng, 6, p.model.radius_x());
    EXPECT_GE(gap(x) * (1 + 1e-10), 0.5 * lmin * (x - gap.solution().x).squaredNorm());
  }
}

TEST(SurrogateGap, SaddlePointAndOrdering) {
  const Problem p = make_problem(20, 4, 3, 5);
  const GapEvaluator gap(p.model);
  const PrimalDualPoint star = gap.solution();
  Matrix y_star(4, 3);
  for (int j = 0; j < 3; ++j) y_star.col(j) = star.y[static_cast<std::size_t>(j)];
  EXPECT_NEAR(surrogate_gap(p.model, star.x, y_star), 0.0, 1e-14);

  Rng rng(6);
  const double rho_y = p.model.lambda_min_c();
  for (int i = 0; i < 200; ++i) {
    const Vector x = random_vector(rng, 4, p.model.radius_x());
    Matrix y(4, 3);
    for (int j = 0; j < 3; ++j) y.col(j) = random_vector(rng, 4, p.model.radius_y());
    const double eps = gap(x), eps_s = surrogate_gap(p.model, x, y);
    EXPECT_LE(eps, eps_s + 1e-12);
    double dist = 0.0;
    for (int j = 0; j < 3; ++j) dist += (star.y[static_cast<std::size_t>(j)] - y.col(j)).squaredNorm();
    EXPECT_GE(eps_s + 1e-12, rho_y / 6.0 * dist);
  }
}

TEST(MixingTimeBound, Examples) {
  EXPECT_EQ(mixing_time_bound(1.0, 0.5, std::ldexp(1.0, -10)), 11u);
  EXPECT_EQ(mixing_time_bound(2.0, 0.5, 2.0), 1u);
  EXPECT_EQ(mixing_time_bound(2.0, 0.5, 5.0), 1u);
  EXPECT_EQ(mixing_time_bound(3.0, 0.0, 1e-9), 1u);
  EXPECT_THROW(mixing_time_bound(0.5, 0.5, 0.1), std::invalid_argument);
  EXPECT_THROW(mixing_time_bound(1.0, 1.0, 0.1), std::invalid_argument);
  EXPECT_THROW(mixing_time_bound(1.0, 0.5, 0.0), std::invalid_argument);
}

TEST(MixingTimeBound, MeasuredDistanceBelowTarget) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PolicyChain chain = random_ergodic_chain(30, 1, 2, seed);
    const MixingEstimate est = estimate_mixing(chain);
    const Vector pi = stationary_distribution(chain);
    for (double eps : {1e-2, 1e-3, 1e-4}) {
      const std::size_t t = mixing_time_bound(est.Gamma, est.rho, eps);
      for (std::size_t s = 0; s < 30; ++s) EXPECT_LE(tv_decay(chain, pi, s, t).back(), eps);
    }
  }
}

TEST(BoundShape, Scaling) {
  const BoundShape a = theorem_bound_shape(2.0, 1.5, 1.2, 0.5, 7 * 64, 64, 10, 2.0, 0.6);
  const BoundShape b = theorem_bound_shape(2.0, 1.5, 1.2, 0.5, 14 * 64, 64, 10, 2.0, 0.6);
  EXPECT_DOUBLE_EQ(b.term_horizon * 2.0, a.term_horizon);
  EXPECT_TRUE(a.warnings.empty());
  EXPECT_FALSE(b.warnings.empty());
  const BoundShape complete = theorem_bound_shape(2.0, 1.5, 1.2, 0.0, 7 * 64, 64, 10, 2.0, 0.6);
  for (double s2 : {0.1, 0.5, 0.9})
    EXPECT_LT(complete.term_network, theorem_bound_shape(2.0, 1.5, 1.2, s2, 7 * 64, 64, 10, 2.0, 0.6).term_network);
  EXPECT_GE(a.tau, 1u);
  EXPECT_FALSE(theorem_bound_shape(2.0, 1.5, 1.2, 0.5, 7 * 4, 4, 10, 2.0, 0.99).warnings.empty());
}

TEST(BoundShape, LogLogSlopeOverSchedule) {
  std::vector<double> ts, totals;
  const std::size_t t1 = 512;
  for (std::size_t k = 7; k <= 14; ++k) {
    const std::size_t T = ((std::size_t{1} << k) - 1) * t1;
    ts.push_back(static_cast<double>(T));
    totals.push_back(theorem_bound_shape(6.75, 2.4, 2.1, 0.88, T, t1, 10, 5.2, 0.68).total());
  }
  const double slope = loglog_slope(ts, totals);
  EXPECT_GE(slope, -1.0);
  EXPECT_LE(slope, -0.8);
}

TEST(LogLogSlope, ExactPowerLaw) {
  EXPECT_NEAR(loglog_slope({1, 10, 100}, {1, 0.1, 0.01}), -1.0, 1e-12);
  EXPECT_THROW(loglog_slope({1}, {1}), std::invalid_argument);
  EXPECT_THROW(loglog_slope({1, 2}, {0, 1}), std::invalid_argument);
}

TEST(MartingaleBound, MonteCarloBound) {
  for (std::size_t T : {1, 10, 100, 1000}) {
    const CheckReport r = verify_lemma3(2.0, T, 1000, 7 + T);
    EXPECT_TRUE(r.passed()) << r.to_text();
  }
  EXPECT_THROW(verify_lemma3(1.0, 10, 50, 1), std::invalid_argument);
}

TEST(MartingaleBound, IidSignsMatchVariance) {
  // For i.i.d. fair signs, E[(mean)^2] = 1 / T.
  Rng rng(9);
  double acc = 0.0;
  for (int trial = 0; trial < 20000; ++trial) {
    double s = 0.0;
    for (int t = 0; t < 100; ++t) s += rng.sign();
    acc += (s / 100.0) * (s / 100.0);
  }
  EXPECT_NEAR(acc / 20000.0, 0.01, 0.0006);
}

TEST(LazyProjectionRegret, RegretInequalityHolds) {
  const CheckReport r = verify_lemma2(100, 11);
  EXPECT_EQ(r.rows().size(), 100u);
  EXPECT_TRUE(r.passed()) << r.to_text();
}

TEST(ConsensusBound, SingleAgentHasNoConsensusError) {
  const Problem p = make_problem(10, 3, 1, 12);
  const GapEvaluator g(p.model);
  RunOptions options;
  options.log_iterates = true;
  const MixingMatrix w = laplacian_mixing(Graph(1, {}));
  const RunTrace t = dhpd_run(p.model, p.chain, p.features, w, DhpdConfig{0.1, 32, 3, 1},
                              [&](const Vector& x) { return g(x); }, options);
  const CheckReport r = verify_lemma1(t, w, p.model.radius_x(), 1.0);
  for (const auto& row : r.rows()) EXPECT_EQ(row.lhs, 0.0);
}

TEST(ConsensusBound, RingRunSatisfiesBound) {
  const Problem p = make_problem(20, 5, 10, 13);
  const GapEvaluator g(p.model);
  const double G = constants(p.model, compute_bounds(p.features, p.chain)).G;
  RunOptions options;
  options.log_iterates = true;
  const MixingMatrix w = laplacian_mixing(ring(10));
  const RunTrace t = dhpd_run(p.model, p.chain, p.features, w, DhpdConfig{0.1, 64, 4, 3},
                              [&](const Vector& x) { return g(x); }, options);
  const CheckReport r = verify_lemma1(t, w, p.model.radius_x(), G);
  EXPECT_EQ(r.rows().size(), 40u);
  EXPECT_TRUE(r.passed()) << r.to_text();
}

TEST(GapChecks, HoldAtEveryCheckpoint) {
  const Problem p = make_problem(20, 5, 6, 14);
  const GapEvaluator g(p.model);
  const RunTrace t = dhpd_run(p.model, p.chain, p.features, laplacian_mixing(erdos_renyi(6, 0.5, 1)),
                              DhpdConfig{0.1, 128, 4, 2}, [&](const Vector& x) { return g(x); });
  const CheckReport r = verify_gap_ordering(p.model, t);
  EXPECT_EQ(r.rows().size(), 5 * 6 * t.checkpoints.size());
  EXPECT_TRUE(r.passed()) << r.to_text();
  const GapReport report = gap_report(p.model, t.checkpoints.back());
  EXPECT_LE(report.eps, report.eps_surrogate);
  EXPECT_NEAR(report.eps, t.checkpoints.back().mean_gap(), 1e-15);
}

TEST(GapChecks, DecompositionHoldsOnSmallRuns) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Problem p = make_problem(15, 4, 5, 20 + seed);
    const GapEvaluator g(p.model);
    const double G = constants(p.model, compute_bounds(p.features, p.chain)).G;
    RunOptions options;
    options.log_iterates = true;
    const RunTrace t = dhpd_run(p.model, p.chain, p.features, laplacian_mixing(ring(5)), DhpdConfig{0.2, 25, 3, seed},
                                [&](const Vector& x) { return g(x); }, options);
    const CheckReport r = verify_gap_decomposition(p.model, t, G);
    EXPECT_EQ(r.rows().size(), 15u);
    EXPECT_TRUE(r.passed()) << r.to_text();
  }
}

TEST(CheckReport, CsvHasOneRowPerCheck) {
  CheckReport r;
  r.add({"a", 1, 2, 0.5, 1.0, true});
  r.add({"b", 0, 0, 2.0, 1.0, false});
  EXPECT_EQ(r.to_csv(), "check,round,agent,lhs,rhs,pass\na,1,2,0.5,1,1\nb,0,0,2,1,0\n");
  EXPECT_FALSE(r.passed());
  EXPECT_EQ(r.failures(), 1u);
  EXPECT_NE(r.to_text().find("FAIL b"), std::string::npos);
}
