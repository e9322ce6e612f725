#include "dhpd/network.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>

using namespace dhpd;

TEST(Graph, NormalizesEdges) {
  const Graph g(3, {{1, 0}, {2, 1}, {0, 1}});
  ASSERT_EQ(g.edges().size(), 2u);
  EXPECT_EQ(g.edges()[0], Graph::Edge(0, 1));
  EXPECT_TRUE(g.has_edge(2, 1));
  EXPECT_THROW(Graph(2, {{0, 0}}), std::invalid_argument);
  EXPECT_THROW(Graph(2, {{0, 2}}), std::invalid_argument);
  EXPECT_THROW(Graph(3, {{0, 1}}), AssumptionError);
}

TEST(Graph, RingFour) {
  const Graph g = ring(4);
  const std::vector<Graph::Edge> expected = {{0, 1}, {0, 3}, {1, 2}, {2, 3}};
  EXPECT_EQ(g.edges(), expected);
}

TEST(Graph, ErdosRenyiWithPOneIsComplete) {
  EXPECT_EQ(erdos_renyi(7, 1.0, 3).edges(), complete(7).edges());
}

TEST(Graph, ErdosRenyiConnectedAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Graph g = erdos_renyi(20, 0.3, seed);
    EXPECT_TRUE(Graph::is_connected(20, g.edges()));
  }
  EXPECT_EQ(erdos_renyi(20, 0.3, 4).edges(), erdos_renyi(20, 0.3, 4).edges());
}

TEST(Mixing, CompleteGraphAveragesExactly) {
  const MixingMatrix m = laplacian_mixing(complete(5));
  EXPECT_LE((m.W - Matrix::Constant(5, 5, 0.2)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(m.sigma2, 0.0, 1e-12);
  EXPECT_NEAR(spectral_gap(m), 1.0, 1e-12);
}

TEST(Mixing, RingFourEigenvalues) {
  const MixingMatrix m = laplacian_mixing(ring(4));
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(m.W).eigenvalues();
  for (int k = 0; k < 4; ++k) {
    // Circulant eigenvalues 1 - (2 - 2 cos(2 pi k / 4)) / 3.
    const double lambda = 1.0 - (2.0 - 2.0 * std::cos(2.0 * M_PI * k / 4.0)) / 3.0;
    EXPECT_NEAR((ev.array() - lambda).abs().minCoeff(), 0.0, 1e-12);
  }
  EXPECT_NEAR(m.sigma2, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(spectral_gap(m), 2.0 / 3.0, 1e-12);
}

TEST(Mixing, SingleNode) {
  const MixingMatrix m = laplacian_mixing(Graph(1, {}));
  EXPECT_EQ(m.W, Matrix::Ones(1, 1));
  EXPECT_EQ(m.sigma2, 0.0);
}

TEST(Mixing, DoublyStochasticOnGraphSupport) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Graph g = erdos_renyi(15, 0.25, seed);
    const MixingMatrix m = laplacian_mixing(g);
    EXPECT_LE((m.W - m.W.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((m.W.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_GE(m.W.minCoeff(), 0.0);
    for (std::size_t i = 0; i < 15; ++i)
      for (std::size_t j = 0; j < 15; ++j)
        if (i != j && !g.has_edge(i, j))
          EXPECT_EQ(m.W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 0.0);
    EXPECT_LT(m.sigma2, 1.0);
  }
}

TEST(Mixing, RingGapShrinksQuadratically) {
  for (std::size_t n : {8, 16, 32}) {
    const double ratio = spectral_gap(laplacian_mixing(ring(n))) / spectral_gap(laplacian_mixing(ring(2 * n)));
    EXPECT_NEAR(ratio, 4.0, 0.3);
  }
}

TEST(EdgeList, RoundTrip) {
  const Graph g = erdos_renyi(9, 0.4, 2);
  const auto path = std::filesystem::temp_directory_path() / "dhpd_test_edges.txt";
  write_edge_list(path, g);
  const Graph back = read_edge_list(path);
  EXPECT_EQ(back.n_nodes(), 9u);
  EXPECT_EQ(back.edges(), g.edges());
  std::filesystem::remove(path);
}
