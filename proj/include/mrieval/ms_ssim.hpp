#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mrieval/volume.hpp"

namespace mrieval {

struct MsSsimSpec {
  int scales = 5;
  std::vector<double> weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 2.0;
  /// At pyramid levels where an axis is shorter than `window`, use the largest
  /// odd window that fits (minimum 3) instead of failing.
  bool adapt_window = true;

  void validate() const;
};

/// Normalized 1D Gaussian taps, `size` odd.
std::vector<double> gaussian_window(int size, double sigma);

/// Separable "valid" correlation of a 3D field with per-axis kernels. The
/// output shrinks by (kernel size - 1) along each axis.
std::vector<double> filter_valid(std::span<const double> in, const Shape3& shape,
                                 const std::array<std::vector<double>, 3>& kernels, Shape3& out_shape);

/// 2x2x2 mean pooling (odd trailing slices dropped).
std::vector<double> downsample2(std::span<const double> in, const Shape3& shape, Shape3& out_shape);

/// Per-scale window sizes for a given base shape; throws Error when the
/// pyramid does not fit.
std::vector<std::array<int, 3>> pyramid_windows(const Shape3& shape, const MsSsimSpec& spec);

/// 3D multi-scale SSIM. Contrast-structure terms at every scale, luminance at
/// the coarsest; terms combined as a weight-powered product. Throws Error on
/// shape mismatch, undersized volumes, or a negative per-scale term.
double ms_ssim(const Volume& a, const Volume& b, const MsSsimSpec& spec = {});

struct PairwiseMsSsim {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single pair
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> scores;
};

/// `count` distinct unordered pairs i<j from n items, uniform without
/// replacement, sorted. Deterministic for a seed on every platform.
std::vector<std::pair<std::size_t, std::size_t>> sample_pairs(std::size_t n, std::size_t count, std::uint64_t seed);

/// Mean/stddev of MS-SSIM over sampled within-set pairs. Results do not
/// depend on `threads`.
PairwiseMsSsim pairwise_ms_ssim(std::span<const Volume> set, std::size_t num_pairs, std::uint64_t seed,
                                const MsSsimSpec& spec = {}, unsigned threads = 1);

}  // namespace mrieval
