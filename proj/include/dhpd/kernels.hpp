#pragma once

#include "dhpd/chain.hpp"
#include "dhpd/features.hpp"
#include "dhpd/types.hpp"

#include <vector>

namespace dhpd {

/// Euclidean projection onto the centered ball of radius `radius`.
Vector project_ball(const Vector& v, double radius);
void project_ball_inplace(Eigen::Ref<Vector> v, double radius);

/// Per-agent iterates of the distributed primal-dual loop, one column per
/// agent: lazy and projected primal/dual vectors plus running sums of the
/// projected iterates since the last restart.
struct NetworkState {
  Matrix x_lazy;
  Matrix x;
  Matrix y_lazy;
  Matrix y;
  Matrix x_sum;
  Matrix y_sum;

  NetworkState() = default;
  NetworkState(std::size_t dim, std::size_t n_agents);
  std::size_t n_agents() const { return static_cast<std::size_t>(x.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(x.rows()); }
};

/// Sparse view of column j of a mixing matrix: (i, W_ij) for W_ij != 0,
/// increasing in i.
using NeighborWeights = std::vector<std::vector<std::pair<std::size_t, double>>>;
NeighborWeights neighbor_weights(const Matrix& w);

/// Everything one synchronous iteration reads besides the state snapshot.
struct StepInputs {
  const FeatureMap* features = nullptr;
  const NeighborWeights* neighbors = nullptr;
  double gamma = 0.0;
  double eta = 0.0;
  double radius_x = 0.0;
  double radius_y = 0.0;
  const SampleTransition* sample = nullptr;
};

namespace kernels {

/// Sum_i W_ij x'_i(t) for one agent.
void mix_column(const NeighborWeights& neighbors, const Matrix& lazy, std::size_t j,
                Eigen::Ref<Vector> out);

/// Updates column j of `next` from the snapshot `cur`. Reads only `cur`, so
/// agents may run in any order or concurrently.
void agent_update(const StepInputs& in, const NetworkState& cur, NetworkState& next,
                  std::size_t j);

/// Reference implementation: agents in index order on the calling thread.
void step_serial(const StepInputs& in, const NetworkState& cur, NetworkState& next);

/// OpenMP over agents; bit-identical to step_serial for any thread count.
void step_parallel(const StepInputs& in, const NetworkState& cur, NetworkState& next,
                   int threads);

}  // namespace kernels

}  // namespace dhpd
