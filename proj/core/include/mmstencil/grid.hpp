// Padded 3D grids (flat row-major storage) and the fine-grained brick layout.
#pragma once

#include <cstdint>
#include <vector>

#include "mmstencil/common.hpp"

namespace mmstencil {

// Row-major padded grid: storage extent per axis is interior + 2*halo,
// x innermost. Interior coordinates run [0, n); halo coordinates are
// negative or >= n. 2D grids use nz = 1, halo.z = 0.
template <typename T>
class Grid3 {
 public:
  Grid3() = default;
  Grid3(Dims3 interior, Dims3 halo) : interior_(interior), halo_(halo) {
    for (int a = 0; a < 3; ++a) {
      if (interior[a] <= 0)
        throw ShapeError(std::string("grid interior extent must be positive on axis ") +
                         axis_name(a));
      if (halo[a] < 0)
        throw ShapeError(std::string("grid halo must be nonnegative on axis ") + axis_name(a));
    }
    padded_ = {interior.x + 2 * halo.x, interior.y + 2 * halo.y, interior.z + 2 * halo.z};
    data_.assign(static_cast<std::size_t>(padded_.volume()), T(0));
  }

  const Dims3& interior() const { return interior_; }
  const Dims3& halo() const { return halo_; }
  const Dims3& padded() const { return padded_; }

  // Offset of an interior-frame coordinate; halo cells are reached with
  // negative coordinates / coordinates beyond the interior extent.
  std::int64_t offset(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return ((z + halo_.z) * padded_.y + (y + halo_.y)) * padded_.x + (x + halo_.x);
  }

  T& at(std::int64_t x, std::int64_t y, std::int64_t z) {
    return data_[static_cast<std::size_t>(offset(x, y, z))];
  }
  const T& at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return data_[static_cast<std::size_t>(offset(x, y, z))];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

  std::int64_t row_stride() const { return padded_.x; }
  std::int64_t plane_stride() const { return padded_.x * padded_.y; }

  bool same_shape(const Grid3& o) const {
    return interior_ == o.interior_ && halo_ == o.halo_;
  }

 private:
  Dims3 interior_{};
  Dims3 halo_{};
  Dims3 padded_{};
  std::vector<T> data_;
};

using Grid3f = Grid3<float>;
using Grid3d = Grid3<double>;

// Brick layout over the padded volume of a grid: bricks of shape
// (bx, by, bz) ordered row-major by brick coordinate (x innermost),
// elements inside a brick stored x-innermost row-major. Padded extents
// must be divisible by the brick shape.
template <typename T>
class BrickGrid {
 public:
  BrickGrid() = default;
  BrickGrid(Dims3 interior, Dims3 halo, Dims3 brick)
      : interior_(interior), halo_(halo), brick_(brick) {
    padded_ = {interior.x + 2 * halo.x, interior.y + 2 * halo.y, interior.z + 2 * halo.z};
    for (int a = 0; a < 3; ++a) {
      if (brick[a] <= 0)
        throw LayoutError(std::string("brick extent must be positive on axis ") + axis_name(a));
      if (padded_[a] % brick[a] != 0)
        throw LayoutError(std::string("padded extent ") + std::to_string(padded_[a]) +
                          " not divisible by brick extent " + std::to_string(brick[a]) +
                          " on axis " + axis_name(a));
    }
    bricks_ = {padded_.x / brick.x, padded_.y / brick.y, padded_.z / brick.z};
    data_.assign(static_cast<std::size_t>(padded_.volume()), T(0));
  }

  const Dims3& interior() const { return interior_; }
  const Dims3& halo() const { return halo_; }
  const Dims3& padded() const { return padded_; }
  const Dims3& brick() const { return brick_; }
  const Dims3& brick_counts() const { return bricks_; }

  std::int64_t brick_volume() const { return brick_.volume(); }

  // Storage offset of an interior-frame coordinate.
  std::int64_t offset(std::int64_t x, std::int64_t y, std::int64_t z) const {
    const std::int64_t px = x + halo_.x, py = y + halo_.y, pz = z + halo_.z;
    const std::int64_t bx = px / brick_.x, by = py / brick_.y, bz = pz / brick_.z;
    const std::int64_t ix = px % brick_.x, iy = py % brick_.y, iz = pz % brick_.z;
    const std::int64_t brick_index = (bz * bricks_.y + by) * bricks_.x + bx;
    const std::int64_t intra = (iz * brick_.y + iy) * brick_.x + ix;
    return brick_index * brick_.volume() + intra;
  }

  T& at(std::int64_t x, std::int64_t y, std::int64_t z) {
    return data_[static_cast<std::size_t>(offset(x, y, z))];
  }
  const T& at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return data_[static_cast<std::size_t>(offset(x, y, z))];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::size_t size() const { return data_.size(); }

 private:
  Dims3 interior_{};
  Dims3 halo_{};
  Dims3 padded_{};
  Dims3 brick_{};
  Dims3 bricks_{};
  std::vector<T> data_;
};

// Default brick shape: B_X equals the vector length of the working
// precision, B_Y = B_Z = 4.
inline Dims3 default_brick(Precision p) {
  return p == Precision::F32 ? Dims3{16, 4, 4} : Dims3{8, 4, 4};
}

template <typename T>
BrickGrid<T> to_brick(const Grid3<T>& g, Dims3 brick);

template <typename T>
Grid3<T> from_brick(const BrickGrid<T>& b);

// Smallest halo >= min_halo making the padded extent divisible by
// `divisor` on each axis (divisor.a == 1 leaves the halo at min_halo).
Dims3 fit_halo(Dims3 interior, Dims3 min_halo, Dims3 divisor);

}  // namespace mmstencil
