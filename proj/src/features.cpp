#include "dhpd/features.hpp"

#include "dhpd/io.hpp"

#include <algorithm>
#include <cmath>

namespace dhpd {

double smallest_singular_value(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().minCoeff();
}

FeatureMap::FeatureMap(Matrix phi) : phi_(std::move(phi)) {
  if (phi_.rows() == 0 || phi_.cols() == 0) throw std::invalid_argument("empty feature matrix");
  if (phi_.cols() > phi_.rows())
    throw std::invalid_argument("feature dimension exceeds the number of states");
  if (!phi_.allFinite()) throw std::invalid_argument("feature entries must be finite");
  if (smallest_singular_value(phi_) <= 1e-10)
    throw AssumptionError("feature matrix must have full column rank");
}

FeatureMap tabular_features(std::size_t n_states) {
  if (n_states < 1) throw std::invalid_argument("n_states must be >= 1");
  const auto n = static_cast<Eigen::Index>(n_states);
  return FeatureMap(Matrix::Identity(n, n));
}

FeatureMap random_features(std::size_t n_states, std::size_t d, std::uint64_t seed) {
  if (d < 1 || d > n_states) throw std::invalid_argument("need 1 <= d <= n_states");
  Rng rng(seed);
  const auto rows = static_cast<Eigen::Index>(n_states);
  const auto cols = static_cast<Eigen::Index>(d);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix phi(rows, cols);
    for (Eigen::Index s = 0; s < rows; ++s)
      for (Eigen::Index k = 0; k < cols; ++k) phi(s, k) = rng.normal();
    bool degenerate_row = false;
    for (Eigen::Index s = 0; s < rows; ++s) {
      const double norm = phi.row(s).norm();
      if (norm == 0.0) degenerate_row = true;
      else phi.row(s) /= norm;
    }
    if (!degenerate_row && smallest_singular_value(phi) > 1e-6) return FeatureMap(std::move(phi));
  }
  throw ConvergenceError("random_features: no well-conditioned draw in 100 attempts");
}

FeatureBounds compute_bounds(const FeatureMap& features, const PolicyChain& chain,
                             RewardNoise noise) {
  if (features.n_states() != chain.n_states())
    throw std::invalid_argument("feature map and chain disagree on |S|");
  const Matrix& p = chain.transition();
  const double gamma = chain.gamma();
  FeatureBounds b;
  for (std::size_t s = 0; s < chain.n_states(); ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const Vector phi_s = features.row(s);
    const double norm_s = phi_s.norm();
    const double max_reward = chain.rewards().col(si).cwiseAbs().maxCoeff() + noise.amplitude;
    b.beta0 = std::max(b.beta0, max_reward * norm_s);
    b.beta2 = std::max(b.beta2, norm_s * norm_s);
    for (std::size_t t = 0; t < chain.n_states(); ++t) {
      if (p(si, static_cast<Eigen::Index>(t)) <= 0.0) continue;
      // ||u v^T||_2 = ||u|| ||v||
      b.beta1 = std::max(b.beta1, norm_s * (phi_s - gamma * features.row(t)).norm());
    }
  }
  return b;
}

void write_features_csv(const std::filesystem::path& path, const FeatureMap& features) {
  io::write_matrix_csv(path, features.phi());
}

FeatureMap read_features_csv(const std::filesystem::path& path) {
  return FeatureMap(io::read_matrix_csv(path));
}

}  // namespace dhpd
