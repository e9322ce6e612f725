#pragma once

#include "dhpd/chain.hpp"
#include "dhpd/types.hpp"

#include <filesystem>

namespace dhpd {

/// Linear value-function dictionary: row s of `phi` is the feature vector of
/// state s. Full column rank is enforced at construction.
class FeatureMap {
 public:
  explicit FeatureMap(Matrix phi);

  const Matrix& phi() const { return phi_; }
  std::size_t dim() const { return static_cast<std::size_t>(phi_.cols()); }
  std::size_t n_states() const { return static_cast<std::size_t>(phi_.rows()); }
  auto row(std::size_t s) const { return phi_.row(static_cast<Eigen::Index>(s)).transpose(); }

 private:
  Matrix phi_;
};

/// Feature and reward magnitudes bounding the sampled gradients.
struct FeatureBounds {
  double beta0 = 0.0;  ///< max |R_j(s)| * ||phi(s)||, noise amplitude included
  double beta1 = 0.0;  ///< max over P(s,s') > 0 of ||phi(s) (phi(s) - gamma phi(s'))^T||_2
  double beta2 = 0.0;  ///< max ||phi(s) phi(s)^T||_2 = max ||phi(s)||^2
};

FeatureMap tabular_features(std::size_t n_states);

/// Gaussian entries, rows scaled to unit norm, resampled until the smallest
/// singular value exceeds 1e-6 (ConvergenceError after 100 attempts).
FeatureMap random_features(std::size_t n_states, std::size_t d, std::uint64_t seed);

FeatureBounds compute_bounds(const FeatureMap& features, const PolicyChain& chain,
                             RewardNoise noise = {});

double smallest_singular_value(const Matrix& m);

void write_features_csv(const std::filesystem::path& path, const FeatureMap& features);
FeatureMap read_features_csv(const std::filesystem::path& path);

}  // namespace dhpd
