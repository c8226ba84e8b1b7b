#include "mrieval/volume.hpp"

#include <cmath>

#include "mrieval/error.hpp"

namespace mrieval {

std::string to_string(const Shape3& s) {
  return "(" + std::to_string(s.nx) + "," + std::to_string(s.ny) + "," + std::to_string(s.nz) + ")";
}

Affine spacing_affine(const Spacing& spacing) {
  Affine a = Affine::Identity();
  for (int i = 0; i < 3; ++i) a(i, i) = spacing[static_cast<std::size_t>(i)];
  return a;
}

template <class T>
VoxelGrid<T>::VoxelGrid(Shape3 shape, Spacing spacing, std::vector<T> data)
    : VoxelGrid(shape, spacing, std::move(data), spacing_affine(spacing)) {}

template <class T>
VoxelGrid<T>::VoxelGrid(Shape3 shape, Spacing spacing, std::vector<T> data, Affine affine, std::string description)
    : shape_(shape),
      spacing_(spacing),
      affine_(std::move(affine)),
      description_(std::move(description)),
      data_(std::move(data)) {
  if (shape_.nx == 0 || shape_.ny == 0 || shape_.nz == 0)
    throw Error("zero-sized grid " + to_string(shape_));
  if (data_.size() != shape_.voxels())
    throw Error("grid data has " + std::to_string(data_.size()) + " values, shape " + to_string(shape_) +
                " needs " + std::to_string(shape_.voxels()));
  for (double s : spacing_)
    if (!(s > 0.0) || !std::isfinite(s)) throw Error("voxel spacing must be positive and finite");
}

template <class T>
VoxelGrid<T> VoxelGrid<T>::with_data(std::vector<T> data) const {
  return VoxelGrid(shape_, spacing_, std::move(data), affine_, description_);
}

template class VoxelGrid<float>;
template class VoxelGrid<std::int32_t>;

}  // namespace mrieval
