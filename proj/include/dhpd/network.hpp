#pragma once

#include "dhpd/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace dhpd {

/// Connected undirected graph without self-loops. Edges are stored once,
/// as (i, j) with i < j, in sorted order.
class Graph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  /// Normalizes and deduplicates `edges`; throws std::invalid_argument on
  /// self-loops or out-of-range endpoints and AssumptionError if disconnected.
  Graph(std::size_t n_nodes, std::vector<Edge> edges);

  std::size_t n_nodes() const { return n_nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::vector<std::size_t> degrees() const;
  bool has_edge(std::size_t i, std::size_t j) const;

  static bool is_connected(std::size_t n_nodes, const std::vector<Edge>& edges);

 private:
  std::size_t n_nodes_;
  std::vector<Edge> edges_;
};

Graph ring(std::size_t n);
Graph complete(std::size_t n);
/// Resamples with fresh sub-seeds until connected; ConvergenceError after
/// 1000 attempts.
Graph erdos_renyi(std::size_t n, double p, std::uint64_t seed);

/// Symmetric doubly stochastic matrix supported on the graph.
struct MixingMatrix {
  Matrix W;
  double sigma2 = 0.0;  ///< second largest |eigenvalue| (0 for a single node)
};

/// W = I - L / (max_degree + 1).
MixingMatrix laplacian_mixing(const Graph& graph);

double spectral_gap(const MixingMatrix& mixing);

/// Second largest absolute eigenvalue of a symmetric matrix.
double second_largest_modulus(const Matrix& symmetric);

/// `i j` per line, 0-based. Connectivity makes the node count the largest
/// index plus one (an empty file is the single-node graph).
void write_edge_list(const std::filesystem::path& path, const Graph& graph);
Graph read_edge_list(const std::filesystem::path& path);

}  // namespace dhpd
