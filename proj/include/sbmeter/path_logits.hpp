#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sbmeter::metrics {

/// Logits recorded along one interpolation path.
struct PathLogits {
  std::string x1_id;
  std::string x2_id;
  /// Band name, or "full" for the whole-image path.
  std::string band = "full";
  std::size_t target_class = 0;
  /// Pixel-space distance between the path endpoints used to normalize the
  /// total variation.
  double norm_distance = 0.0;
  std::vector<double> lambdas;
  /// n × K, row-major; row q belongs to lambdas[q].
  std::vector<double> logits;
  std::size_t num_classes = 0;

  std::size_t steps() const { return lambdas.size(); }
  double logit(std::size_t q, std::size_t k) const { return logits[q * num_classes + k]; }
};

/// Throws std::invalid_argument when the record breaks its invariants:
/// n >= 2, strictly increasing finite λ, finite logits of size n×K,
/// target_class < K, finite non-negative norm_distance.
void validate(const PathLogits& path);

}  // namespace sbmeter::metrics
