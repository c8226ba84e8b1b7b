#include <algorithm>
#include <cmath>
#include <sstream>

#include "mrieval/error.hpp"
#include "mrieval/volume.hpp"

namespace mrieval {
namespace {

std::string fmt_real(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

template <class T>
void check_shape_spacing(const VoxelGrid<T>& g, const Shape3& shape, const Spacing& spacing, double tol,
                         GeometryReport& report) {
  static constexpr const char* kAxis[] = {"0", "1", "2"};
  for (std::size_t a = 0; a < 3; ++a) {
    if (g.shape()[a] != shape[a])
      report.issues.push_back({std::string("shape[") + kAxis[a] + "]", std::to_string(shape[a]),
                               std::to_string(g.shape()[a])});
  }
  for (std::size_t a = 0; a < 3; ++a) {
    if (std::abs(g.spacing()[a] - spacing[a]) > tol)
      report.issues.push_back({std::string("spacing[") + kAxis[a] + "]", fmt_real(spacing[a]),
                               fmt_real(g.spacing()[a])});
  }
}

template <class T>
VoxelGrid<T> pad_grid(const VoxelGrid<T>& g, const Shape3& target, T fill) {
  const auto m = pad_margins(g.shape(), target);
  const auto& s = g.shape();
  std::vector<T> out(target.voxels(), fill);
  const auto src = g.data();
  for (std::size_t z = 0; z < s.nz; ++z)
    for (std::size_t y = 0; y < s.ny; ++y) {
      const std::size_t dst = m[0][0] + target.nx * ((y + m[1][0]) + target.ny * (z + m[2][0]));
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(g.index(0, y, z)), s.nx,
                  out.begin() + static_cast<std::ptrdiff_t>(dst));
    }

  Affine affine = g.affine();
  const Eigen::Vector3d shift(static_cast<double>(m[0][0]), static_cast<double>(m[1][0]),
                              static_cast<double>(m[2][0]));
  affine.block<3, 1>(0, 3) -= affine.block<3, 3>(0, 0) * shift;
  return VoxelGrid<T>(target, g.spacing(), std::move(out), affine, g.description());
}

}  // namespace

GeometryReport validate_geometry(const Volume& v, const Shape3& expected_shape, const Spacing& expected_spacing,
                                 double tol) {
  if (!(tol >= 0.0)) throw Error("geometry tolerance must be non-negative");
  GeometryReport report;
  check_shape_spacing(v, expected_shape, expected_spacing, tol, report);
  const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
  if (*lo < -1.0 - tol || *hi > 1.0 + tol || std::isnan(*lo) || std::isnan(*hi))
    report.issues.push_back({"intensity_range", "[-1,1]", "[" + fmt_real(*lo) + "," + fmt_real(*hi) + "]"});
  return report;
}

GeometryReport validate_geometry(const LabelMap& m, const Shape3& expected_shape, const Spacing& expected_spacing,
                                 double tol) {
  if (!(tol >= 0.0)) throw Error("geometry tolerance must be non-negative");
  GeometryReport report;
  check_shape_spacing(m, expected_shape, expected_spacing, tol, report);
  return report;
}

Volume normalize_intensity(const Volume& v) {
  const auto [lo_it, hi_it] = std::minmax_element(v.data().begin(), v.data().end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw Error("cannot normalize a constant volume");
  const double range = hi - lo;
  std::vector<float> out(v.size());
  std::transform(v.data().begin(), v.data().end(), out.begin(),
                 [&](float x) { return static_cast<float>(2.0 * ((x - lo) / range) - 1.0); });
  return v.with_data(std::move(out));
}

std::array<std::array<std::size_t, 2>, 3> pad_margins(const Shape3& from, const Shape3& to) {
  std::array<std::array<std::size_t, 2>, 3> m{};
  for (std::size_t a = 0; a < 3; ++a) {
    if (to[a] < from[a])
      throw Error("pad target " + to_string(to) + " is smaller than input " + to_string(from) + " on axis " +
                  std::to_string(a));
    const std::size_t diff = to[a] - from[a];
    m[a] = {diff / 2, diff - diff / 2};
  }
  return m;
}

Volume pad_to_shape(const Volume& v, const Shape3& target, float fill) { return pad_grid(v, target, fill); }

LabelMap pad_to_shape(const LabelMap& m, const Shape3& target, std::int32_t fill) {
  return LabelMap(pad_grid<std::int32_t>(m, target, fill), m.table());
}

}  // namespace mrieval
