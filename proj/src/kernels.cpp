#include "dhpd/kernels.hpp"

#include "dhpd/objective.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dhpd {

Vector project_ball(const Vector& v, double radius) {
  Vector out = v;
  project_ball_inplace(out, radius);
  return out;
}

void project_ball_inplace(Eigen::Ref<Vector> v, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("projection radius must be positive");
  const double norm = v.norm();
  if (norm > radius) v *= radius / norm;
}

NetworkState::NetworkState(std::size_t dim, std::size_t n_agents) {
  const auto d = static_cast<Eigen::Index>(dim);
  const auto n = static_cast<Eigen::Index>(n_agents);
  x_lazy = Matrix::Zero(d, n);
  x = Matrix::Zero(d, n);
  y_lazy = Matrix::Zero(d, n);
  y = Matrix::Zero(d, n);
  x_sum = Matrix::Zero(d, n);
  y_sum = Matrix::Zero(d, n);
}

NeighborWeights neighbor_weights(const Matrix& w) {
  NeighborWeights out(static_cast<std::size_t>(w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      if (w(i, j) != 0.0) out[static_cast<std::size_t>(j)].emplace_back(i, w(i, j));
  return out;
}

namespace kernels {

void mix_column(const NeighborWeights& neighbors, const Matrix& lazy, std::size_t j,
                Eigen::Ref<Vector> out) {
  out.setZero();
  for (const auto& [i, weight] : neighbors[j]) out += weight * lazy.col(static_cast<Eigen::Index>(i));
}

void agent_update(const StepInputs& in, const NetworkState& cur, NetworkState& next,
                  std::size_t j) {
  const auto col = static_cast<Eigen::Index>(j);
  const auto d = cur.x.rows();
  const SampleTransition& xi = *in.sample;
  Vector gx(d), gy(d);
  stochastic_gradient_into(*in.features, in.gamma, xi.local_rewards(col), cur.x.col(col),
                           cur.y.col(col), xi.s, xi.s_next, gx, gy);

  auto x_lazy = next.x_lazy.col(col);
  mix_column(*in.neighbors, cur.x_lazy, j, x_lazy);
  x_lazy -= in.eta * gx;
  next.x.col(col) = x_lazy;
  project_ball_inplace(next.x.col(col), in.radius_x);

  next.y_lazy.col(col) = cur.y_lazy.col(col) + in.eta * gy;
  next.y.col(col) = next.y_lazy.col(col);
  project_ball_inplace(next.y.col(col), in.radius_y);

  next.x_sum.col(col) = cur.x_sum.col(col) + next.x.col(col);
  next.y_sum.col(col) = cur.y_sum.col(col) + next.y.col(col);
}

void step_serial(const StepInputs& in, const NetworkState& cur, NetworkState& next) {
  for (std::size_t j = 0; j < cur.n_agents(); ++j) agent_update(in, cur, next, j);
}

void step_parallel(const StepInputs& in, const NetworkState& cur, NetworkState& next,
                   int threads) {
  const auto n = static_cast<long>(cur.n_agents());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads)
#endif
  for (long j = 0; j < n; ++j) agent_update(in, cur, next, static_cast<std::size_t>(j));
  (void)threads;
}

}  // namespace kernels

}  // namespace dhpd
