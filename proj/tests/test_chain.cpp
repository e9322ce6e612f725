#include "dhpd/chain.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>

using namespace dhpd;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

PolicyChain two_state(double gamma = 0.9) {
  return PolicyChain(mat2(0.9, 0.1, 0.2, 0.8), mat2(1.0, 0.0, 0.5, 2.0), gamma);
}

}  // namespace

TEST(PolicyChain, RejectsInvalidInput) {
  EXPECT_THROW(PolicyChain(mat2(0.5, 0.6, 0.5, 0.5), Matrix::Zero(1, 2), 0.9), std::invalid_argument);
  EXPECT_THROW(PolicyChain(mat2(1.5, -0.5, 0.5, 0.5), Matrix::Zero(1, 2), 0.9), std::invalid_argument);
  EXPECT_THROW(PolicyChain(mat2(0.5, 0.5, 0.5, 0.5), Matrix::Zero(1, 2), 1.0), std::invalid_argument);
  EXPECT_THROW(PolicyChain(mat2(0.5, 0.5, 0.5, 0.5), Matrix::Zero(1, 3), 0.5), std::invalid_argument);
}

TEST(PolicyChain, GlobalRewardIsAgentMean) {
  const PolicyChain chain = two_state();
  EXPECT_DOUBLE_EQ(chain.global_rewards()(0), 0.75);
  EXPECT_DOUBLE_EQ(chain.global_rewards()(1), 1.0);
}

TEST(PolicyChain, ErgodicityFlags) {
  EXPECT_TRUE(two_state().is_ergodic());
  const PolicyChain flip(mat2(0, 1, 1, 0), Matrix::Zero(1, 2), 0.5);
  EXPECT_TRUE(flip.is_irreducible());
  EXPECT_FALSE(flip.is_aperiodic());
  const PolicyChain absorbing(mat2(1, 0, 0.5, 0.5), Matrix::Zero(1, 2), 0.5);
  EXPECT_FALSE(absorbing.is_irreducible());
}

TEST(Stationary, SingleState) {
  const PolicyChain chain(Matrix::Ones(1, 1), Matrix::Zero(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(stationary_distribution(chain)(0), 1.0);
}

TEST(Stationary, UniformChain) {
  const Vector pi = stationary_distribution(PolicyChain(mat2(0.5, 0.5, 0.5, 0.5), Matrix::Zero(1, 2), 0.5));
  EXPECT_NEAR(pi(0), 0.5, 1e-12);
  EXPECT_NEAR(pi(1), 0.5, 1e-12);
}

TEST(Stationary, TwoStateMatchesLeftEigenvector) {
  const Vector pi = stationary_distribution(two_state());
  EXPECT_NEAR(pi(0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(pi(1), 1.0 / 3.0, 1e-12);
}

TEST(Stationary, PeriodicChainUsesDirectSolve) {
  const Vector pi = stationary_distribution(PolicyChain(mat2(0, 1, 1, 0), Matrix::Zero(1, 2), 0.5));
  EXPECT_NEAR(pi(0), 0.5, 1e-12);
}

TEST(Stationary, ReducibleChainThrows) {
  EXPECT_THROW(stationary_distribution(PolicyChain(mat2(1, 0, 0, 1), Matrix::Zero(1, 2), 0.5)),
               AssumptionError);
}

TEST(Stationary, RandomChainsSatisfyBalance) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const PolicyChain chain = random_ergodic_chain(30, 2, 3, seed);
    const Vector pi = stationary_distribution(chain);
    EXPECT_NEAR(pi.sum(), 1.0, 1e-12);
    EXPECT_LE((chain.transition().transpose() * pi - pi).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Sampler, DeterministicChainSingleTransition) {
  const PolicyChain flip(mat2(0, 1, 1, 0), Matrix::Zero(1, 2), 0.5);
  const auto traj = sample_trajectory(flip, 1, 7);
  ASSERT_EQ(traj.size(), 1u);
  EXPECT_EQ(traj[0].s, 0u);
  EXPECT_EQ(traj[0].s_next, 1u);
}

TEST(Sampler, SameSeedSameSequence) {
  const PolicyChain chain = random_ergodic_chain(10, 3, 2, 5);
  EXPECT_EQ(sample_trajectory(chain, 500, 9), sample_trajectory(chain, 500, 9));
  EXPECT_NE(sample_trajectory(chain, 500, 9), sample_trajectory(chain, 500, 10));
}

TEST(Sampler, TransitionsAreContiguous) {
  const auto traj = sample_trajectory(random_ergodic_chain(8, 1, 3, 2), 1000, 3);
  for (std::size_t t = 1; t < traj.size(); ++t) EXPECT_EQ(traj[t].s, traj[t - 1].s_next);
}

TEST(Sampler, EmpiricalFrequenciesApproachStationary) {
  const PolicyChain chain = two_state();
  const auto traj = sample_trajectory(chain, 100000, 21);
  double visits0 = 0;
  for (const auto& xi : traj) visits0 += xi.s == 0 ? 1 : 0;
  EXPECT_NEAR(visits0 / 1e5, 2.0 / 3.0, 0.01);
}

TEST(Sampler, LongRunFrequenciesOnLargerChain) {
  const PolicyChain chain = random_ergodic_chain(50, 1, 3, 4);
  const Vector pi = stationary_distribution(chain);
  const auto traj = sample_trajectory(chain, 1000000, 5);
  Vector freq = Vector::Zero(50);
  for (const auto& xi : traj) freq(static_cast<Eigen::Index>(xi.s)) += 1e-6;
  EXPECT_LE((freq - pi).cwiseAbs().maxCoeff(), 5e-3);
}

TEST(Sampler, NoiseIsBoundedAndCentered) {
  const PolicyChain chain = two_state();
  const auto traj = sample_trajectory(chain, 200000, 8, RewardNoise{0.5});
  double mean_err = 0.0;
  for (const auto& xi : traj) {
    const double expected = chain.rewards()(0, static_cast<Eigen::Index>(xi.s));
    EXPECT_LE(std::abs(xi.local_rewards(0) - expected), 0.5 + 1e-15);
    mean_err += (xi.local_rewards(0) - expected) / 2e5;
  }
  EXPECT_NEAR(mean_err, 0.0, 0.01);
}

TEST(TvDistance, Examples) {
  Vector p(2), q(2);
  p << 1, 0;
  q << 0, 1;
  EXPECT_DOUBLE_EQ(tv_distance(p, p), 0.0);
  EXPECT_DOUBLE_EQ(tv_distance(p, q), 2.0);
  p << 0.9, 0.1;
  q << 0.5, 0.5;
  EXPECT_NEAR(tv_distance(p, q), 0.8, 1e-15);
  EXPECT_THROW(tv_distance(p, Vector::Zero(3)), std::invalid_argument);
}

TEST(Mixing, RankOneChainMixesInOneStep) {
  const MixingEstimate est = estimate_mixing(PolicyChain(mat2(0.5, 0.5, 0.5, 0.5), Matrix::Zero(1, 2), 0.5));
  EXPECT_EQ(est.rho, 0.0);
  EXPECT_EQ(est.Gamma, 1.0);
}

TEST(Mixing, TwoStateRateIsSecondEigenvalue) {
  const MixingEstimate est = estimate_mixing(two_state());
  EXPECT_NEAR(est.rho, 0.7, 1e-6);
  // d_tv(e_0 P^t, pi) = (2/3) 0.7^t and from state 1 it is (4/3) 0.7^t.
  EXPECT_NEAR(est.Gamma, 4.0 / 3.0, 1e-4);
}

TEST(Mixing, EnvelopeDominatesMeasuredDecay) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MixingEstimate est = estimate_mixing(random_ergodic_chain(25, 1, 2, seed));
    for (std::size_t t = 1; t <= est.worst_tv.size(); ++t) {
      if (est.worst_tv[t - 1] < kTvFloor) break;
      EXPECT_LE(est.worst_tv[t - 1], est.Gamma * std::pow(est.rho, static_cast<double>(t)) * (1 + 1e-9))
          << "seed " << seed << " t " << t;
    }
  }
}

TEST(Mixing, PeriodicChainIsRejected) {
  EXPECT_THROW(estimate_mixing(PolicyChain(mat2(0, 1, 1, 0), Matrix::Zero(1, 2), 0.5)), AssumptionError);
}

TEST(RandomChain, Invariants) {
  const PolicyChain single = random_ergodic_chain(1, 2, 1, 3);
  EXPECT_EQ(single.transition(), Matrix::Ones(1, 1));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PolicyChain chain = random_ergodic_chain(40, 4, 3, seed);
    EXPECT_LE((chain.transition().rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_TRUE(chain.is_ergodic());
    EXPECT_GE(chain.rewards().minCoeff(), 0.0);
    EXPECT_LT(chain.rewards().colwise().sum().maxCoeff(), 1.0);
  }
  EXPECT_EQ(random_ergodic_chain(12, 2, 2, 9).transition(), random_ergodic_chain(12, 2, 2, 9).transition());
}

TEST(Trajectory, CsvRoundTrip) {
  const auto traj = sample_trajectory(random_ergodic_chain(6, 3, 2, 1), 50, 2, RewardNoise{0.1});
  const auto path = std::filesystem::temp_directory_path() / "dhpd_test_traj.csv";
  write_trajectory_csv(path, traj);
  EXPECT_EQ(read_trajectory_csv(path), traj);
  std::filesystem::remove(path);
}
