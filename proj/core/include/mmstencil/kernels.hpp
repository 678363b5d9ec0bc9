// Stencil kernels lowered onto the matrix-tile engine. A kernel sweeps the
// grid in (V_L, V_L, V_Z) blocks; per block, 1D passes accumulate outer
// products into the tile set and the assembled result is stored to the
// destination exactly once.
#pragma once

#include <cstdint>
#include <vector>

#include "mmstencil/analysis.hpp"
#include "mmstencil/common.hpp"
#include "mmstencil/grid.hpp"
#include "mmstencil/stencil_spec.hpp"
#include "mmstencil/tile_engine.hpp"

namespace mmstencil {

// Dense row-major scratch block, x innermost, no halo frame of its own.
template <typename T>
struct HostBlock {
  Dims3 extents{0, 0, 0};
  std::vector<T> v;

  HostBlock() = default;
  explicit HostBlock(Dims3 e)
      : extents(e), v(static_cast<std::size_t>(e.volume()), T(0)) {}

  std::int64_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return (z * extents.y + y) * extents.x + x;
  }
  T& at(std::int64_t x, std::int64_t y, std::int64_t z) { return v[index(x, y, z)]; }
  const T& at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return v[index(x, y, z)];
  }
  void fill(T value) { std::fill(v.begin(), v.end(), value); }
};

// 1D stencil of radius r = (c.size()-1)/2 along one axis of a block.
// Input extents carry 2r extra planes on the stencil axis; the output has
// the plain block extents. With add=true the result is accumulated onto
// out, otherwise assigned. All arithmetic runs through engine tiles.
//
// y pass: in (vx, vy+2r, vz). Output rows live in tile rows; z-layers
// round-robin across tiles.
template <typename T>
void axis_apply_y(TileEngine<T>& e, const HostBlock<T>& in, const std::vector<T>& c,
                  HostBlock<T>& out, bool add);

// x pass: in (vx+2r, vy, vz). Transposed mode stages the input through
// tile transposes and reads it with unit-stride loads; gather mode loads
// strided columns directly. Both produce bitwise-identical results.
template <typename T>
void axis_apply_x(TileEngine<T>& e, const HostBlock<T>& in, const std::vector<T>& c,
                  HostBlock<T>& out, bool add, bool transposed);

// z pass: in (vx, vy, vz+2r). Tile rows hold z-layers; y-rows round-robin
// across tiles.
template <typename T>
void axis_apply_z(TileEngine<T>& e, const HostBlock<T>& in, const std::vector<T>& c,
                  HostBlock<T>& out, bool add);

// Dense 2D box stencil on one block: in (vx+2r, vy+2r, vz), coefficient
// slab c2d indexed [(jx+r)*(2r+1) + (jy+r)]. Per outer step the kernel
// loads at most three x-aligned vector segments per z-layer and splices
// the 2r+1 shifted rows from them (no redundant reloads).
template <typename T>
void box_apply(TileEngine<T>& e, const HostBlock<T>& in, const std::vector<T>& c2d,
               int radius, HostBlock<T>& out, bool add);

// Full 3D box stencil on one block: in (vx+2r, vy+2r, vz+2r). The 2r+1
// z-plane passes accumulate in the tiles; one extraction at the end.
template <typename T>
void box3d_apply(TileEngine<T>& e, const HostBlock<T>& in, const std::vector<T>& c3d,
                 int radius, HostBlock<T>& out, bool add);

// Input accessor over either layout. Coordinates are interior-frame.
template <typename T>
class GridSource {
 public:
  explicit GridSource(const Grid3<T>& flat) : flat_(&flat) {}
  explicit GridSource(const BrickGrid<T>& brick) : brick_(&brick) {}

  T load(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return flat_ ? flat_->data()[flat_->offset(x, y, z)]
                 : brick_->data()[brick_->offset(x, y, z)];
  }
  Dims3 interior() const { return flat_ ? flat_->interior() : brick_->interior(); }
  Dims3 halo() const { return flat_ ? flat_->halo() : brick_->halo(); }
  bool is_brick() const { return brick_ != nullptr; }
  const Grid3<T>* flat() const { return flat_; }
  const BrickGrid<T>* brick() const { return brick_; }

 private:
  const Grid3<T>* flat_ = nullptr;
  const BrickGrid<T>* brick_ = nullptr;
};

enum class XPassMode { Transposed, Gather };

struct KernelOptions {
  Layout layout = Layout::Flat;
  bool prefetch = false;
  XPassMode x_pass = XPassMode::Transposed;
  int block_z = 0;          // 0: tile count of the precision
  Dims3 brick{0, 0, 0};     // 0: default brick for the precision
  bool collect_trace = true;
};

template <typename T>
struct KernelResult {
  Grid3<T> out;
  InstructionTrace trace;
  TrafficReport traffic;
  std::int64_t blocks_processed = 0;
};

// Per-axis kernel coefficient arrays (length 2r+1, cast to T) extracted
// from a stencil. For stars the shared center travels with the y pass.
template <typename T>
std::vector<T> axis_coefficients(const StencilSpec& spec, int axis, bool with_center);
template <typename T>
std::vector<T> box_plane_coefficients(const StencilSpec& spec, int jz);

// Sweeps the blocks covering [origin, origin+extent) of the interior and
// writes results into out. origin/extent must be aligned to the block
// shape. Traces accumulate in the engine; the caller owns clearing.
template <typename T>
void run_tile(TileEngine<T>& e, const StencilSpec& spec, const GridSource<T>& src,
              Grid3<T>& out, Dims3 origin, Dims3 extent, const KernelOptions& opt);

// Full single-worker sweep. Brick layout transforms the input internally;
// the destination is always a flat grid.
template <typename T>
KernelResult<T> run_kernel(const StencilSpec& spec, const Grid3<T>& in,
                           const KernelOptions& opt = {});

// Block depth used when options leave it defaulted.
int default_block_z(Precision p);

#define MMSTENCIL_KERNELS_EXTERN(T)                                                        \
  extern template void axis_apply_y<T>(TileEngine<T>&, const HostBlock<T>&,                \
                                       const std::vector<T>&, HostBlock<T>&, bool);        \
  extern template void axis_apply_x<T>(TileEngine<T>&, const HostBlock<T>&,                \
                                       const std::vector<T>&, HostBlock<T>&, bool, bool);  \
  extern template void axis_apply_z<T>(TileEngine<T>&, const HostBlock<T>&,                \
                                       const std::vector<T>&, HostBlock<T>&, bool);        \
  extern template void box_apply<T>(TileEngine<T>&, const HostBlock<T>&,                   \
                                    const std::vector<T>&, int, HostBlock<T>&, bool);      \
  extern template void box3d_apply<T>(TileEngine<T>&, const HostBlock<T>&,                 \
                                      const std::vector<T>&, int, HostBlock<T>&, bool);    \
  extern template std::vector<T> axis_coefficients<T>(const StencilSpec&, int, bool);      \
  extern template std::vector<T> box_plane_coefficients<T>(const StencilSpec&, int);       \
  extern template void run_tile<T>(TileEngine<T>&, const StencilSpec&,                     \
                                   const GridSource<T>&, Grid3<T>&, Dims3, Dims3,          \
                                   const KernelOptions&);                                  \
  extern template KernelResult<T> run_kernel<T>(const StencilSpec&, const Grid3<T>&,       \
                                                const KernelOptions&);

MMSTENCIL_KERNELS_EXTERN(float)
MMSTENCIL_KERNELS_EXTERN(double)
#undef MMSTENCIL_KERNELS_EXTERN

}  // namespace mmstencil
