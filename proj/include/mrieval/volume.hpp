#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mrieval/region_table.hpp"

namespace mrieval {

/// Voxel counts along x, y, z. x varies fastest in memory (NIfTI order).
struct Shape3 {
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t voxels() const { return nx * ny * nz; }
  std::size_t operator[](std::size_t axis) const { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);

/// mm per voxel along each axis.
using Spacing = std::array<double, 3>;
/// voxel index -> world mm.
using Affine = Eigen::Matrix4d;

Affine spacing_affine(const Spacing& spacing);

template <class T>
class VoxelGrid {
 public:
  using value_type = T;

  VoxelGrid() = default;
  /// Throws Error unless every axis is positive, data.size() matches the
  /// shape and spacing is strictly positive and finite.
  VoxelGrid(Shape3 shape, Spacing spacing, std::vector<T> data);
  VoxelGrid(Shape3 shape, Spacing spacing, std::vector<T> data, Affine affine, std::string description = {});

  const Shape3& shape() const { return shape_; }
  const Spacing& spacing() const { return spacing_; }
  const Affine& affine() const { return affine_; }
  const std::string& description() const { return description_; }
  std::span<const T> data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + shape_.nx * (y + shape_.ny * z);
  }
  T at(std::size_t x, std::size_t y, std::size_t z) const { return data_[index(x, y, z)]; }
  double voxel_volume_mm3() const { return spacing_[0] * spacing_[1] * spacing_[2]; }

  /// Same geometry, new voxel values.
  VoxelGrid with_data(std::vector<T> data) const;

 private:
  Shape3 shape_;
  Spacing spacing_{1.0, 1.0, 1.0};
  Affine affine_ = Affine::Identity();
  std::string description_;
  std::vector<T> data_;
};

extern template class VoxelGrid<float>;
extern template class VoxelGrid<std::int32_t>;

/// Scalar intensity volume.
using Volume = VoxelGrid<float>;

/// Integer region codes (0 = background) plus the table that names them.
class LabelMap : public VoxelGrid<std::int32_t> {
 public:
  LabelMap() = default;
  explicit LabelMap(VoxelGrid<std::int32_t> grid, RegionTable table = {})
      : VoxelGrid<std::int32_t>(std::move(grid)), table_(std::move(table)) {}

  const RegionTable& table() const { return table_; }
  LabelMap with_table(RegionTable table) const { return LabelMap(*this, std::move(table)); }

 private:
  RegionTable table_;
};

struct GeometryIssue {
  std::string field;
  std::string expected;
  std::string observed;
};

struct GeometryReport {
  std::vector<GeometryIssue> issues;
  bool conforms() const { return issues.empty(); }
};

inline constexpr Shape3 kStandardShape{144, 192, 144};
inline constexpr Spacing kStandardSpacing{1.0, 1.0, 1.0};

/// Shape and spacing checks; intensity range [-1-tol, 1+tol] is also checked
/// for volumes (a single "intensity_range" issue).
GeometryReport validate_geometry(const Volume& v, const Shape3& expected_shape = kStandardShape,
                                 const Spacing& expected_spacing = kStandardSpacing, double tol = 0.01);
GeometryReport validate_geometry(const LabelMap& m, const Shape3& expected_shape = kStandardShape,
                                 const Spacing& expected_spacing = kStandardSpacing, double tol = 0.01);

/// Affine map of [min, max] onto [-1, 1]. Throws Error for constant volumes.
Volume normalize_intensity(const Volume& v);

/// Low/high margins used by pad_to_shape along each axis. An odd difference
/// puts the extra voxel on the high-index side.
std::array<std::array<std::size_t, 2>, 3> pad_margins(const Shape3& from, const Shape3& to);

/// Centers the input in a grid of `target` shape. The affine translation is
/// shifted so original voxels keep their world coordinates.
Volume pad_to_shape(const Volume& v, const Shape3& target, float fill = -1.0f);
LabelMap pad_to_shape(const LabelMap& m, const Shape3& target, std::int32_t fill = 0);

}  // namespace mrieval
