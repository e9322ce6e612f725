#include "dhpd/network.hpp"

#include "dhpd/io.hpp"
#include "dhpd/rng.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace dhpd {

Graph::Graph(std::size_t n_nodes, std::vector<Edge> edges) : n_nodes_(n_nodes) {
  if (n_nodes == 0) throw std::invalid_argument("graph needs at least one node");
  for (auto& [i, j] : edges) {
    if (i == j) throw std::invalid_argument("self-loop on node " + std::to_string(i));
    if (i >= n_nodes || j >= n_nodes) throw std::invalid_argument("edge endpoint out of range");
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (!is_connected(n_nodes, edges)) throw AssumptionError("communication graph is not connected");
  edges_ = std::move(edges);
}

bool Graph::is_connected(std::size_t n_nodes, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::size_t>> adj(n_nodes);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<bool> seen(n_nodes, false);
  std::queue<std::size_t> frontier;
  seen[0] = true;
  frontier.push(0);
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push(v);
      }
  }
  return reached == n_nodes;
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> deg(n_nodes_, 0);
  for (const auto& [i, j] : edges_) {
    ++deg[i];
    ++deg[j];
  }
  return deg;
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{i, j});
}

Graph ring(std::size_t n) {
  std::vector<Graph::Edge> edges;
  if (n == 2) edges.emplace_back(0, 1);
  if (n > 2)
    for (std::size_t i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return Graph(n, std::move(edges));
}

Graph complete(std::size_t n) {
  std::vector<Graph::Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return Graph(n, std::move(edges));
}

Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("graph needs at least one node");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("edge probability must lie in (0, 1]");
  Rng master(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Rng rng(master.split());
    std::vector<Graph::Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform() < p) edges.emplace_back(i, j);
    if (Graph::is_connected(n, edges)) return Graph(n, std::move(edges));
  }
  throw ConvergenceError("erdos_renyi: no connected graph in 1000 attempts");
}

double second_largest_modulus(const Matrix& symmetric) {
  if (symmetric.rows() <= 1) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
  std::vector<double> mods(static_cast<std::size_t>(symmetric.rows()));
  for (Eigen::Index i = 0; i < symmetric.rows(); ++i) mods[static_cast<std::size_t>(i)] =
      std::abs(eig.eigenvalues()(i));
  std::sort(mods.begin(), mods.end(), std::greater<>());
  return mods[1];
}

MixingMatrix laplacian_mixing(const Graph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.n_nodes());
  const auto deg = graph.degrees();
  const double scale = 1.0 / static_cast<double>(*std::max_element(deg.begin(), deg.end()) + 1);
  MixingMatrix m;
  m.W = Matrix::Zero(n, n);
  for (const auto& [i, j] : graph.edges()) {
    const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
    m.W(a, b) = scale;
    m.W(b, a) = scale;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    m.W(i, i) = 1.0 - scale * static_cast<double>(deg[static_cast<std::size_t>(i)]);
  m.sigma2 = second_largest_modulus(m.W);
  return m;
}

double spectral_gap(const MixingMatrix& mixing) { return 1.0 - mixing.sigma2; }

void write_edge_list(const std::filesystem::path& path, const Graph& graph) {
  std::string text;
  for (const auto& [i, j] : graph.edges()) text += std::to_string(i) + " " + std::to_string(j) + "\n";
  io::write_file(path, text);
}

Graph read_edge_list(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::vector<Graph::Edge> edges;
  std::size_t n = 1;
  std::size_t i, j;
  while (in >> i >> j) {
    edges.emplace_back(i, j);
    n = std::max(n, std::max(i, j) + 1);
  }
  if (!in.eof()) throw std::runtime_error(path.string() + ": malformed edge line");
  return Graph(n, std::move(edges));
}

}  // namespace dhpd
