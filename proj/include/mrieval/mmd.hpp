#pragma once

#include <optional>
#include <span>
#include <string>

#include "mrieval/embedding.hpp"
#include "mrieval/volume.hpp"

namespace mrieval {

enum class KernelKind { Gaussian, Linear, Polynomial };

/// k(x,y) = exp(-|x-y|^2 / (2 h^2))   gaussian, h explicit or median heuristic
///        = x.y                        linear
///        = (x.y + coef)^degree        polynomial
struct KernelSpec {
  KernelKind kind = KernelKind::Gaussian;
  std::optional<double> bandwidth;  // unset: median heuristic
  int degree = 2;
  double coef = 1.0;

  static KernelSpec gaussian(std::optional<double> bandwidth = std::nullopt) {
    return {KernelKind::Gaussian, bandwidth, 2, 1.0};
  }
  static KernelSpec linear() { return {KernelKind::Linear, std::nullopt, 1, 0.0}; }
  static KernelSpec polynomial(int degree, double coef) { return {KernelKind::Polynomial, std::nullopt, degree, coef}; }

  void validate() const;
  /// "gaussian(median)", "gaussian(h=2)", "linear", "polynomial(d=3,c=1)".
  std::string describe() const;
  static KernelSpec parse(std::string_view text);
};

/// Median of the non-zero pairwise Euclidean distances over the pooled rows.
/// Throws Error when every pooled point is identical.
double median_heuristic_bandwidth(const EmbeddingSet& x, const EmbeddingSet& y);

/// Unbiased U-statistic estimate of MMD^2. Summation order is fixed, so the
/// value does not depend on `threads`.
double mmd2_unbiased(const EmbeddingSet& x, const EmbeddingSet& y, const KernelSpec& k, unsigned threads = 1);

/// mmd2_unbiased over raw flattened voxels. The linear kernel uses the
/// sum-vector identity sum_{i!=j} x_i.x_j = |sum x_i|^2 - sum |x_i|^2, which is
/// O(N * voxels) instead of O(N^2 * voxels).
double image_space_mmd(std::span<const Volume> xs, std::span<const Volume> ys,
                       const KernelSpec& k = KernelSpec::linear(), unsigned threads = 1);

}  // namespace mrieval
