#include "dhpd/expcli.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

using namespace dhpd;
using namespace dhpd::exp;
namespace fs = std::filesystem;

namespace {

class ExpCli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("dhpd_expcli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  ExperimentConfig small(const std::string& sub = "a") const {
    ExperimentConfig cfg;
    cfg.problem.n_states = 12;
    cfg.problem.n_agents = 4;
    cfg.problem.d = 3;
    cfg.problem.seed = 5;
    cfg.topology.kind = "ring";
    cfg.solver.T1 = 64;
    cfg.solver.K = 3;
    cfg.output.directory = (root_ / sub).string();
    return cfg;
  }

  fs::path root_;
  std::ostringstream log_;
};

}  // namespace

TEST(Config, RoundTripsThroughText) {
  ExperimentConfig cfg = reference_config();
  cfg.problem.gamma = 0.9;
  cfg.solver.eta1 = 0.1 + 1e-17;
  cfg.solver.label = "mine";
  cfg.topology.kind = "ring";
  EXPECT_EQ(parse_config(to_string(cfg)), cfg);
  EXPECT_EQ(parse_config(to_string(reference_config())), reference_config());
}

TEST(Config, CommentsAndBlankLines) {
  const ExperimentConfig cfg = parse_config("# header\n\nproblem.n_states = 70  # trailing\nsolver.K=2\n");
  EXPECT_EQ(cfg.problem.n_states, 70u);
  EXPECT_EQ(cfg.solver.K, 2u);
}

TEST(Config, RejectsUnknownKeyWithLine) {
  try {
    parse_config("problem.n_states = 5\nproblem.bogus = 1\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  EXPECT_THROW(parse_config("solver.K = 1\nsolver.K = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("solver.K 2\n"), ConfigError);
  EXPECT_THROW(parse_config("solver.K = two\n"), ConfigError);
}

TEST(Config, ValidateRejectsBadValues) {
  ExperimentConfig cfg;
  cfg.solver.algorithm = "sgd";
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.problem.gamma = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.topology.kind = "star";
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Schedule, ReferenceT1IsFixedPoint) {
  EXPECT_EQ(reference_t1(1.0, 0.0, 7), 512u);
  const std::size_t t1 = reference_t1(5.0, 0.999, 7);
  EXPECT_GT(t1, 512u);
  const std::size_t T = ((std::size_t{1} << 7) - 1) * t1;
  EXPECT_EQ(t1, std::max<std::size_t>(512, mixing_time_bound(5.0, 0.999, 1.0 / static_cast<double>(T))));
  EXPECT_EQ(schedule_samples(DhpdConfig{0.1, 10, 3, 0}), 67u);
}

TEST_F(ExpCli, GenerateIsByteIdentical) {
  const ExperimentConfig a = small("a"), b = small("b");
  ASSERT_EQ(cmd_generate(a, log_), 0);
  ASSERT_EQ(cmd_generate(b, log_), 0);
  for (const auto& entry : fs::recursive_directory_iterator(a.bundle_dir())) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a.bundle_dir());
    EXPECT_EQ(io::read_file(entry.path()), io::read_file(b.bundle_dir() / rel)) << rel;
  }
  EXPECT_EQ(load_bundle(a.bundle_dir()).fingerprint, load_bundle(b.bundle_dir()).fingerprint);
}

TEST_F(ExpCli, ManifestMatchesLibrary) {
  const ExperimentConfig cfg = small();
  ASSERT_EQ(cmd_generate(cfg, log_), 0);
  const Bundle bundle = load_bundle(cfg.bundle_dir());
  const io::KeyValues& m = bundle.manifest;
  EXPECT_EQ(io::parse_real(m.at("sigma2")), laplacian_mixing(ring(4)).sigma2);
  EXPECT_EQ(io::parse_real(m.at("sigma2")), bundle.mixing.sigma2);
  EXPECT_NEAR(io::parse_real(m.at("rho_cert")), GapEvaluator(bundle.model).rho_cert(), 1e-12);
  const MixingEstimate mix = estimate_mixing(bundle.chain);
  EXPECT_EQ(io::parse_real(m.at("Gamma")), mix.Gamma);
  EXPECT_EQ(io::parse_real(m.at("rho")), mix.rho);
  EXPECT_EQ(std::stoul(m.at("T")), 7u * 64u);
  EXPECT_EQ(std::stoul(m.at("tau")), mixing_time_bound(mix.Gamma, mix.rho, 1.0 / 448.0));
  EXPECT_EQ(m.at("dim"), "3");
}

TEST_F(ExpCli, SingleStateChainHasUnitMixingTime) {
  ExperimentConfig cfg = small();
  cfg.problem.n_states = 1;
  cfg.problem.d = 1;
  cfg.problem.branching = 1;
  cfg.solver.T1 = 0;
  ASSERT_EQ(cmd_generate(cfg, log_), 0);
  const Bundle bundle = load_bundle(cfg.bundle_dir());
  EXPECT_EQ(bundle.manifest.at("tau"), "1");
  EXPECT_EQ(bundle.manifest.at("T1"), "512");
}

TEST_F(ExpCli, SingleRoundRunMatchesFixedStepRun) {
  ExperimentConfig h = small();
  h.solver.K = 1;
  h.solver.label = "h";
  ExperimentConfig s = h;
  s.solver.algorithm = "spd_dist";
  s.solver.eta = h.solver.eta1;
  s.solver.T = 64;
  s.solver.label = "s";
  ASSERT_EQ(cmd_generate(h, log_), 0);
  ASSERT_EQ(cmd_run(h, log_), 0);
  ASSERT_EQ(cmd_run(s, log_), 0);
  const std::string trace = io::read_file(h.run_dir() / "trace.csv");
  EXPECT_EQ(trace, io::read_file(s.run_dir() / "trace.csv"));

  std::istringstream rows(trace);
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, "samples,agent,gap");
  std::size_t count = 0;
  while (std::getline(rows, line)) {
    EXPECT_GE(io::parse_real(io::split(line, ',').at(2)), 0.0);
    ++count;
  }
  const io::KeyValues meta = io::read_key_values(h.run_dir() / "meta.txt");
  EXPECT_EQ(count, 4 * std::stoul(meta.at("checkpoints")));
  EXPECT_EQ(meta.at("total_samples"), "63");
}

TEST_F(ExpCli, CompareWritesAlignedCurves) {
  ExperimentConfig a = small();
  a.solver.label = "one";
  ExperimentConfig b = a;
  b.solver.label = "two";
  ASSERT_EQ(cmd_generate(a, log_), 0);
  ASSERT_EQ(cmd_run(a, log_), 0);
  ASSERT_EQ(cmd_run(b, log_), 0);
  ASSERT_EQ(cmd_compare({a, b}, root_ / "cmp", log_), 0);
  const std::string csv = io::read_file(root_ / "cmp" / "compare" / "compare.csv");
  std::istringstream rows(csv);
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, "samples,run,mean_gap");
  std::map<std::string, std::vector<std::string>> by_run;
  while (std::getline(rows, line)) {
    const auto cells = io::split(line, ',');
    by_run[cells.at(1)].push_back(cells.at(0) + "," + cells.at(2));
  }
  ASSERT_EQ(by_run.size(), 2u);
  EXPECT_EQ(by_run["one"], by_run["two"]);
  const io::KeyValues meta = io::read_key_values(a.run_dir() / "meta.txt");
  EXPECT_EQ(by_run["one"].size(), std::stoul(meta.at("checkpoints")));
  const std::string svg = io::read_file(root_ / "cmp" / "compare" / "compare.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("one"), std::string::npos);
}

TEST_F(ExpCli, CompareRefusesDifferentProblems) {
  ExperimentConfig a = small("a");
  ExperimentConfig b = small("b");
  b.problem.seed = 6;
  ASSERT_EQ(cmd_generate(a, log_), 0);
  ASSERT_EQ(cmd_generate(b, log_), 0);
  ASSERT_EQ(cmd_run(a, log_), 0);
  ASSERT_EQ(cmd_run(b, log_), 0);
  EXPECT_THROW(cmd_compare({a, b}, root_ / "cmp", log_), std::runtime_error);
  EXPECT_THROW(cmd_compare({a}, root_ / "cmp", log_), ConfigError);
}

TEST_F(ExpCli, RunWithoutBundleFails) {
  EXPECT_THROW(cmd_run(small(), log_), std::runtime_error);
}

TEST_F(ExpCli, VerifyPassesAndReportsEveryRow) {
  const ExperimentConfig cfg = small();
  ASSERT_EQ(cmd_generate(cfg, log_), 0);
  ASSERT_EQ(cmd_verify(cfg, log_), 0);
  const CheckReport report = verify_bundle(cfg, load_bundle(cfg.bundle_dir()));
  const std::string csv = io::read_file(fs::path(cfg.output.directory) / "verify" / "report.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), report.rows().size() + 1);
  EXPECT_EQ(csv, report.to_csv());
}

TEST_F(ExpCli, SingularCovarianceIsRejected) {
  const ExperimentConfig cfg = small();
  ASSERT_EQ(cmd_generate(cfg, log_), 0);
  io::write_matrix_csv(cfg.bundle_dir() / "model" / "C.csv", Matrix::Zero(3, 3));
  EXPECT_THROW(load_bundle(cfg.bundle_dir()), AssumptionError);
}
