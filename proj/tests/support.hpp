// Shared fixtures and brute-force oracles for the test binaries. Oracles are
// written from the textbook definitions, deliberately without reusing any
// library code path they are compared against.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrieval/embedding.hpp"
#include "mrieval/mmd.hpp"
#include "mrieval/volume.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return MRIEVAL_TEST_DATA; }
inline std::filesystem::path source_dir() { return MRIEVAL_SOURCE_DIR; }

/// Fresh empty directory under the system temp dir, unique per name.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("mrieval_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0,
                                     double shift = 0.0) {
  std::normal_distribution<double> n(shift, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline mrieval::Volume random_volume(std::mt19937_64& rng, mrieval::Shape3 s, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<float> d(s.voxels());
  for (auto& v : d) v = static_cast<float>(u(rng));
  return mrieval::Volume(s, {1, 1, 1}, std::move(d));
}

/// Smooth random field in [-1, 1]: sum of a few low-frequency cosines.
inline mrieval::Volume smooth_volume(std::mt19937_64& rng, mrieval::Shape3 s) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::array<double, 5>> waves(4);
  for (auto& w : waves) w = {u(rng) * 0.3, u(rng) * 0.3, u(rng) * 0.3, u(rng) * 6.28, 0.2 + 0.1 * u(rng)};
  std::vector<float> d(s.voxels());
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y)
      for (std::size_t x = 0; x < s.nx; ++x) {
        double v = 0.0;
        for (const auto& w : waves) v += w[4] * std::cos(w[0] * x + w[1] * y + w[2] * z + w[3]);
        d[x + s.nx * (y + s.ny * z)] = static_cast<float>(std::clamp(v, -1.0, 1.0));
      }
  return mrieval::Volume(s, {1, 1, 1}, std::move(d));
}

// --- MMD -------------------------------------------------------------------

inline double kernel_oracle(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const mrieval::KernelSpec& k,
                            double h) {
  switch (k.kind) {
    case mrieval::KernelKind::Linear:
      return a.dot(b);
    case mrieval::KernelKind::Polynomial:
      return std::pow(a.dot(b) + k.coef, k.degree);
    case mrieval::KernelKind::Gaussian:
      return std::exp(-(a - b).squaredNorm() / (2.0 * h * h));
  }
  return 0.0;
}

/// Explicit double loops over i != j.
inline double mmd2_oracle(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const mrieval::KernelSpec& k,
                          double h) {
  const auto m = x.rows(), n = y.rows();
  long double kxx = 0, kyy = 0, kxy = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) kxx += kernel_oracle(x.row(i), x.row(j), k, h);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) kyy += kernel_oracle(y.row(i), y.row(j), k, h);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kxy += kernel_oracle(x.row(i), y.row(j), k, h);
  return static_cast<double>(kxx / (m * (m - 1.0L)) + kyy / (n * (n - 1.0L)) - 2.0L * kxy / (m * static_cast<long double>(n)));
}

// --- SSIM ------------------------------------------------------------------

/// Single-scale SSIM by direct 3D window sums: for every valid window
/// position, local Gaussian-weighted moments are accumulated voxel by voxel.
inline double ssim_oracle(const mrieval::Volume& a, const mrieval::Volume& b, int window, double sigma, double k1,
                          double k2, double range) {
  const auto s = a.shape();
  std::vector<double> g(static_cast<std::size_t>(window));
  double gs = 0;
  for (int i = 0; i < window; ++i) {
    const double d = i - window / 2;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * sigma * sigma));
    gs += g[static_cast<std::size_t>(i)];
  }
  for (auto& v : g) v /= gs;
  const double c1 = std::pow(k1 * range, 2), c2 = std::pow(k2 * range, 2);
  const std::size_t w = static_cast<std::size_t>(window);
  long double total = 0;
  std::size_t count = 0;
  for (std::size_t z = 0; z + w <= s.nz; ++z)
    for (std::size_t y = 0; y + w <= s.ny; ++y)
      for (std::size_t x = 0; x + w <= s.nx; ++x) {
        double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (std::size_t k = 0; k < w; ++k)
          for (std::size_t j = 0; j < w; ++j)
            for (std::size_t i = 0; i < w; ++i) {
              const double wt = g[i] * g[j] * g[k];
              const double va = a.at(x + i, y + j, z + k), vb = b.at(x + i, y + j, z + k);
              ma += wt * va;
              mb += wt * vb;
              aa += wt * va * va;
              bb += wt * vb * vb;
              ab += wt * va * vb;
            }
        const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * sab + c2)) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
        ++count;
      }
  return static_cast<double>(total / count);
}

// --- statistics --------------------------------------------------------------

inline double mean(const std::vector<double>& v) {
  long double s = 0;
  for (double x : v) s += x;
  return static_cast<double>(s / v.size());
}

inline double sample_var(const std::vector<double>& v) {
  const double m = mean(v);
  long double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return static_cast<double>(s / (v.size() - 1));
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

}  // namespace testing
