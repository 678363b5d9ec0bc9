#include "mmstencil/kernels.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

namespace mmstencil {

namespace {

int check_odd_coeffs(std::size_t n) {
  if (n == 0 || n % 2 == 0)
    throw std::invalid_argument("coefficient count must be odd and nonzero");
  return static_cast<int>(n / 2);
}

// Column vector for input step s: lane i carries c[s - i] when that offset
// exists, so tile row i accumulates its stencil sum as s sweeps the input.
template <typename T>
VectorReg<T> coeff_column(const T* c, int len, int in_step, int lanes) {
  VectorReg<T> col;
  col.n = lanes;
  for (int i = 0; i < lanes; ++i) {
    const int k = in_step - i;
    col.lane[i] = (k >= 0 && k < len) ? c[k] : T(0);
  }
  return col;
}

// Extract one tile slice, optionally accumulate onto the existing row, and
// store it. Accumulation order is fixed: previous contents + extracted.
template <typename T>
void extract_row(TileEngine<T>& e, int tile, int slice, bool horizontal, HostBlock<T>& out,
                 std::int64_t y, std::int64_t z, bool add, std::int64_t lanes) {
  VectorReg<T> v = e.slice_extract(tile, slice, horizontal);
  T* dst = &out.at(0, y, z);
  const auto addr = static_cast<std::uint64_t>(out.index(0, y, z));
  if (add) {
    const VectorReg<T> prev =
        e.load_row(dst, 0, lanes, static_cast<int>(lanes), OpTag::Scratch, addr, nullptr);
    for (int j = 0; j < lanes; ++j) v.lane[j] = static_cast<T>(prev.lane[j] + v.lane[j]);
  }
  e.store_row(dst, v, static_cast<int>(lanes), OpTag::Scratch, addr);
}

template <typename T>
void trace_coeff_load(TileEngine<T>& e, const T* c, std::size_t n) {
  e.load_row(c, 0, static_cast<std::int64_t>(n),
             std::min<int>(static_cast<int>(n), kMaxVectorLanes), OpTag::Coeff, 0, nullptr);
}

}  // namespace

template <typename T>
void axis_apply_y(TileEngine<T>& e, const HostBlock<T>& in, const std::vector<T>& c,
                  HostBlock<T>& out, bool add) {
  const int r = check_odd_coeffs(c.size());
  const std::int64_t vx = out.extents.x, vy = out.extents.y, vz = out.extents.z;
  const int vl = e.vector_length();
  if (vx > vl || vy > vl) throw ShapeError("block extents exceed the vector length");
  if (in.extents.x != vx || in.extents.y != vy + 2 * r || in.extents.z != vz)
    throw ShapeError("y-pass input extents mismatch");
  const LaneMask xm = full_mask(static_cast<int>(vx));
  const LaneMask ym = full_mask(static_cast<int>(vy));
  const int tiles = e.tile_count();
  trace_coeff_load(e, c.data(), c.size());
  for (std::int64_t zc = 0; zc < vz; zc += tiles) {
    const int chunk = static_cast<int>(std::min<std::int64_t>(tiles, vz - zc));
    for (int t = 0; t < chunk; ++t) e.zero_tile(t);
    for (std::int64_t y_in = 0; y_in < vy + 2 * r; ++y_in) {
      const VectorReg<T> col = coeff_column(c.data(), static_cast<int>(c.size()),
                                            static_cast<int>(y_in), static_cast<int>(vy));
      for (int t = 0; t < chunk; ++t) {
        const VectorReg<T> row = e.load_row(
            &in.at(0, y_in, zc + t), 0, vx, static_cast<int>(vx), OpTag::Input,
            static_cast<std::uint64_t>(in.index(0, y_in, zc + t)), nullptr,
            static_cast<std::uint32_t>(y_in));
        e.outer_product(t, col, row, ym, xm, OpTag::Input, static_cast<std::uint32_t>(y_in));
      }
    }
    for (int t = 0; t < chunk; ++t)
      for (std::int64_t y = 0; y < vy; ++y)
        extract_row(e, t, static_cast<int>(y), true, out, y, zc + t, add, vx);
  }
}

template <typename T>
void axis_apply_x(TileEngine<T>& e, const HostBlock<T>& in, const std::vector<T>& c,
                  HostBlock<T>& out, bool add, bool transposed) {
  const int r = check_odd_coeffs(c.size());
  const std::int64_t vx = out.extents.x, vy = out.extents.y, vz = out.extents.z;
  const int vl = e.vector_length();
  if (vx > vl || vy > vl) throw ShapeError("block extents exceed the vector length");
  if (in.extents.x != vx + 2 * r || in.extents.y != vy || in.extents.z != vz)
    throw ShapeError("x-pass input extents mismatch");
  if (transposed && (vx != vl || vy != vl))
    throw ShapeError("transposed x pass requires full blocks");
  const std::int64_t in_x = vx + 2 * r;
  const LaneMask xm = full_mask(static_cast<int>(vx));
  const LaneMask ym = full_mask(static_cast<int>(vy));
  const int tiles = e.tile_count();
  trace_coeff_load(e, c.data(), c.size());

  const std::int64_t nchunks = (in_x + vl - 1) / vl;
  std::vector<T> stage;
  std::vector<std::vector<T>> tbuf;
  if (transposed) {
    stage.assign(static_cast<std::size_t>(vl) * vl, T(0));
    tbuf.assign(static_cast<std::size_t>(tiles),
                std::vector<T>(static_cast<std::size_t>(nchunks) * vl * vl, T(0)));
  }

  for (std::int64_t zc = 0; zc < vz; zc += tiles) {
    const int chunk = static_cast<int>(std::min<std::int64_t>(tiles, vz - zc));
    if (transposed) {
      // Stage the input slab in transposed form: tbuf row x_in holds the
      // y-contiguous vector in(x_in, :), built from V_L x V_L tile
      // transposes (2*V_L slice ops each).
      for (int t = 0; t < chunk; ++t) {
        for (std::int64_t ci = 0; ci < nchunks; ++ci) {
          for (int i = 0; i < vl; ++i) {
            for (int j = 0; j < vl; ++j) {
              const std::int64_t x = ci * vl + j;
              stage[static_cast<std::size_t>(i) * vl + j] =
                  x < in_x ? in.at(x, i, zc + t) : T(0);
            }
          }
          e.transpose_block(stage.data(), vl, tbuf[t].data() + ci * vl * vl, vl);
        }
      }
    }
    for (int t = 0; t < chunk; ++t) e.zero_tile(t);
    for (std::int64_t x_in = 0; x_in < in_x; ++x_in) {
      const VectorReg<T> coeff = coeff_column(c.data(), static_cast<int>(c.size()),
                                              static_cast<int>(x_in), static_cast<int>(vx));
      for (int t = 0; t < chunk; ++t) {
        if (transposed) {
          const VectorReg<T> row = e.load_row(
              tbuf[t].data() + x_in * vl, 0, vl, vl, OpTag::Input,
              static_cast<std::uint64_t>(x_in), nullptr, static_cast<std::uint32_t>(x_in));
          // tile[x_out][y]
          e.outer_product(t, coeff, row, xm, ym, OpTag::Input,
                          static_cast<std::uint32_t>(x_in));
        } else {
          const VectorReg<T> colv = e.load_strided(
              &in.at(x_in, 0, zc + t), in.extents.x, static_cast<int>(vy), OpTag::Gather,
              static_cast<std::uint64_t>(in.index(x_in, 0, zc + t)));
          // tile[y][x_out]
          e.outer_product(t, colv, coeff, ym, xm, OpTag::Input,
                          static_cast<std::uint32_t>(x_in));
        }
      }
    }
    for (int t = 0; t < chunk; ++t)
      for (std::int64_t y = 0; y < vy; ++y)
        extract_row(e, t, static_cast<int>(y), !transposed, out, y, zc + t, add, vx);
  }
}

template <typename T>
void axis_apply_z(TileEngine<T>& e, const HostBlock<T>& in, const std::vector<T>& c,
                  HostBlock<T>& out, bool add) {
  const int r = check_odd_coeffs(c.size());
  const std::int64_t vx = out.extents.x, vy = out.extents.y, vz = out.extents.z;
  const int vl = e.vector_length();
  if (vx > vl || vz > vl) throw ShapeError("block extents exceed the vector length");
  if (in.extents.x != vx || in.extents.y != vy || in.extents.z != vz + 2 * r)
    throw ShapeError("z-pass input extents mismatch");
  const LaneMask xm = full_mask(static_cast<int>(vx));
  const LaneMask zm = full_mask(static_cast<int>(vz));
  const int tiles = e.tile_count();
  trace_coeff_load(e, c.data(), c.size());
  for (std::int64_t yg = 0; yg < vy; yg += tiles) {
    const int chunk = static_cast<int>(std::min<std::int64_t>(tiles, vy - yg));
    for (int t = 0; t < chunk; ++t) e.zero_tile(t);
    for (std::int64_t z_in = 0; z_in < vz + 2 * r; ++z_in) {
      const VectorReg<T> col = coeff_column(c.data(), static_cast<int>(c.size()),
                                            static_cast<int>(z_in), static_cast<int>(vz));
      for (int t = 0; t < chunk; ++t) {
        const std::int64_t y = yg + t;
        const VectorReg<T> row = e.load_row(
            &in.at(0, y, z_in), 0, vx, static_cast<int>(vx), OpTag::Input,
            static_cast<std::uint64_t>(in.index(0, y, z_in)), nullptr,
            static_cast<std::uint32_t>(z_in));
        // tile[z_out][x]
        e.outer_product(t, col, row, zm, xm, OpTag::Input, static_cast<std::uint32_t>(z_in));
      }
    }
    for (int t = 0; t < chunk; ++t)
      for (std::int64_t z = 0; z < vz; ++z)
        extract_row(e, t, static_cast<int>(z), true, out, yg + t, z, add, vx);
  }
}

namespace {

// One dense plane pass of a box stencil over the z-layers [zc, zc+chunk),
// reading input planes shifted by z_shift and accumulating into the tiles.
// Each outer step (one input row per layer) loads exactly three x-aligned
// segments; the 2r+1 x-shifted rows are spliced from them.
template <typename T>
void box_plane_pass(TileEngine<T>& e, const HostBlock<T>& in, const T* c2d, int radius,
                    std::int64_t zc, int chunk, std::int64_t z_shift,
                    std::uint32_t* step_counter) {
  const int vl = e.vector_length();
  const std::int64_t vx = in.extents.x - 2 * radius;
  const std::int64_t vy = in.extents.y - 2 * radius;
  const std::int64_t in_x = in.extents.x;
  const int w = 2 * radius + 1;
  const LaneMask xm = full_mask(static_cast<int>(vx));
  const LaneMask ym = full_mask(static_cast<int>(vy));
  std::array<std::array<VectorReg<T>, 3>, 16> seg;
  for (std::int64_t y_in = 0; y_in < vy + 2 * radius; ++y_in) {
    const std::uint32_t step0 = *step_counter;
    for (int t = 0; t < chunk; ++t) {
      const std::int64_t z = zc + t + z_shift;
      const T* base = &in.at(0, y_in, z);
      const auto addr = static_cast<std::uint64_t>(in.index(0, y_in, z));
      const std::uint32_t step = step0 + static_cast<std::uint32_t>(t);
      seg[t][0] = e.load_row(base, radius - vl, in_x, vl, OpTag::BoxSegment, addr, nullptr, step);
      seg[t][1] = e.load_row(base, radius, in_x, vl, OpTag::BoxSegment, addr + vl, nullptr, step);
      seg[t][2] =
          e.load_row(base, radius + vl, in_x, vl, OpTag::BoxSegment, addr + 2 * vl, nullptr, step);
    }
    for (int j = -radius; j <= radius; ++j) {
      const T* crow = c2d + static_cast<std::size_t>(j + radius) * w;
      const VectorReg<T> col =
          coeff_column(crow, w, static_cast<int>(y_in), static_cast<int>(vy));
      for (int t = 0; t < chunk; ++t) {
        const std::uint32_t step = step0 + static_cast<std::uint32_t>(t);
        const VectorReg<T> row =
            j < 0 ? e.splice(seg[t][0], seg[t][1], vl + j, OpTag::BoxSegment, step)
                  : e.splice(seg[t][1], seg[t][2], j, OpTag::BoxSegment, step);
        e.outer_product(t, col, row, ym, xm, OpTag::BoxSegment, step);
      }
    }
    *step_counter += static_cast<std::uint32_t>(chunk);
  }
}

}  // namespace

template <typename T>
void box_apply(TileEngine<T>& e, const HostBlock<T>& in, const std::vector<T>& c2d,
               int radius, HostBlock<T>& out, bool add) {
  const int w = 2 * radius + 1;
  if (radius < 1) throw std::invalid_argument("box radius must be positive");
  if (c2d.size() != static_cast<std::size_t>(w) * w)
    throw std::invalid_argument("box coefficient slab size mismatch");
  const std::int64_t vx = out.extents.x, vy = out.extents.y, vz = out.extents.z;
  const int vl = e.vector_length();
  if (vx != vl) throw ShapeError("box pass requires a full-width block");
  if (vy > vl) throw ShapeError("block extents exceed the vector length");
  if (in.extents.x != vx + 2 * radius || in.extents.y != vy + 2 * radius ||
      in.extents.z != vz)
    throw ShapeError("box input extents mismatch");
  const int tiles = std::min(e.tile_count(), 16);
  trace_coeff_load(e, c2d.data(), c2d.size());
  std::uint32_t step = 0;
  for (std::int64_t zc = 0; zc < vz; zc += tiles) {
    const int chunk = static_cast<int>(std::min<std::int64_t>(tiles, vz - zc));
    for (int t = 0; t < chunk; ++t) e.zero_tile(t);
    box_plane_pass(e, in, c2d.data(), radius, zc, chunk, 0, &step);
    for (int t = 0; t < chunk; ++t)
      for (std::int64_t y = 0; y < vy; ++y)
        extract_row(e, t, static_cast<int>(y), true, out, y, zc + t, add, vx);
  }
}

template <typename T>
void box3d_apply(TileEngine<T>& e, const HostBlock<T>& in, const std::vector<T>& c3d,
                 int radius, HostBlock<T>& out, bool add) {
  const int w = 2 * radius + 1;
  if (radius < 1) throw std::invalid_argument("box radius must be positive");
  if (c3d.size() != static_cast<std::size_t>(w) * w * w)
    throw std::invalid_argument("box coefficient cube size mismatch");
  const std::int64_t vx = out.extents.x, vy = out.extents.y, vz = out.extents.z;
  const int vl = e.vector_length();
  if (vx != vl) throw ShapeError("box pass requires a full-width block");
  if (vy > vl) throw ShapeError("block extents exceed the vector length");
  if (in.extents.x != vx + 2 * radius || in.extents.y != vy + 2 * radius ||
      in.extents.z != vz + 2 * radius)
    throw ShapeError("box input extents mismatch");
  const int tiles = std::min(e.tile_count(), 16);
  trace_coeff_load(e, c3d.data(), c3d.size());
  std::uint32_t step = 0;
  for (std::int64_t zc = 0; zc < vz; zc += tiles) {
    const int chunk = static_cast<int>(std::min<std::int64_t>(tiles, vz - zc));
    for (int t = 0; t < chunk; ++t) e.zero_tile(t);
    // All z-plane passes accumulate in the tiles; a single extraction
    // writes each output element once.
    for (int jz = 0; jz < w; ++jz)
      box_plane_pass(e, in, c3d.data() + static_cast<std::size_t>(jz) * w * w, radius, zc,
                     chunk, jz, &step);
    for (int t = 0; t < chunk; ++t)
      for (std::int64_t y = 0; y < vy; ++y)
        extract_row(e, t, static_cast<int>(y), true, out, y, zc + t, add, vx);
  }
}

template <typename T>
std::vector<T> axis_coefficients(const StencilSpec& spec, int axis, bool with_center) {
  const int r = spec.radius;
  std::vector<T> c(static_cast<std::size_t>(2 * r + 1), T(0));
  for (int k = -r; k <= r; ++k) {
    if (k == 0 && !with_center) continue;
    Dims3 off{0, 0, 0};
    if (axis == 0) off.x = k;
    else if (axis == 1) off.y = k;
    else off.z = k;
    c[static_cast<std::size_t>(k + r)] = static_cast<T>(spec.coeff_at(off));
  }
  return c;
}

template <typename T>
std::vector<T> box_plane_coefficients(const StencilSpec& spec, int jz) {
  const int r = spec.radius;
  const int w = 2 * r + 1;
  std::vector<T> c(static_cast<std::size_t>(w) * w, T(0));
  for (int jx = -r; jx <= r; ++jx)
    for (int jy = -r; jy <= r; ++jy)
      c[static_cast<std::size_t>(jx + r) * w + (jy + r)] =
          static_cast<T>(spec.coeff_at(Dims3{jx, jy, jz}));
  return c;
}

namespace {

enum class KernelForm { Star2D, Star3D, Box2D, Box3D };

KernelForm form_of(const StencilSpec& spec) {
  if (spec.pattern == Pattern::Star)
    return spec.dims == 2 ? KernelForm::Star2D : KernelForm::Star3D;
  if (spec.pattern == Pattern::Box)
    return spec.dims == 2 ? KernelForm::Box2D : KernelForm::Box3D;
  throw UnsupportedKernelError("only star and box stencils run on the tile engine");
}

template <typename T>
void stage_block(const GridSource<T>& src, Dims3 origin, HostBlock<T>& dst) {
  for (std::int64_t z = 0; z < dst.extents.z; ++z)
    for (std::int64_t y = 0; y < dst.extents.y; ++y) {
      T* row = &dst.at(0, y, z);
      for (std::int64_t x = 0; x < dst.extents.x; ++x)
        row[x] = src.load(origin.x + x, origin.y + y, origin.z + z);
    }
}

// One prefetch record per x-row of the region (flat) or per touched brick.
template <typename T>
std::int64_t emit_prefetch(TileEngine<T>& e, const GridSource<T>& src, Dims3 lo,
                           Dims3 extents, Dims3 brick) {
  std::int64_t emitted = 0;
  if (!src.is_brick()) {
    const Grid3<T>& flat = *src.flat();
    for (std::int64_t z = 0; z < extents.z; ++z)
      for (std::int64_t y = 0; y < extents.y; ++y) {
        e.prefetch(static_cast<std::uint64_t>(flat.offset(lo.x, lo.y + y, lo.z + z)),
                   OpTag::Input);
        ++emitted;
      }
    return emitted;
  }
  const BrickGrid<T>& bg = *src.brick();
  const Dims3 halo = bg.halo();
  const std::int64_t bvol = brick.volume();
  std::set<std::int64_t> ids;
  for (std::int64_t z = lo.z; z < lo.z + extents.z;) {
    for (std::int64_t y = lo.y; y < lo.y + extents.y;) {
      for (std::int64_t x = lo.x; x < lo.x + extents.x;) {
        ids.insert(bg.offset(x, y, z) / bvol);
        x += brick.x - ((x + halo.x) % brick.x);
      }
      y += brick.y - ((y + halo.y) % brick.y);
    }
    z += brick.z - ((z + halo.z) % brick.z);
  }
  for (std::int64_t id : ids) {
    e.prefetch(static_cast<std::uint64_t>(id), OpTag::Input);
    ++emitted;
  }
  return emitted;
}

struct TileRunStats {
  std::int64_t blocks = 0;
  std::int64_t prefetch_ops = 0;
};

template <typename T>
TileRunStats run_tile_impl(TileEngine<T>& e, const StencilSpec& spec,
                           const GridSource<T>& src, Grid3<T>& out, Dims3 origin,
                           Dims3 extent, const KernelOptions& opt, Dims3 brick) {
  const KernelForm form = form_of(spec);
  const int r = spec.radius;
  const int vl = e.vector_length();
  const std::int64_t bz =
      spec.dims == 2 ? 1 : (opt.block_z > 0 ? opt.block_z : e.tile_count());
  if (bz > vl) throw ShapeError("block depth exceeds the vector length");
  const Dims3 blk{vl, vl, bz};
  for (int a = 0; a < 3; ++a) {
    if (origin[a] % blk[a] != 0 || extent[a] % blk[a] != 0)
      throw ShapeError(std::string("tile not aligned to the block shape on ") +
                       axis_name(a));
  }

  std::vector<T> cx, cy, cz, cbox;
  if (form == KernelForm::Star2D || form == KernelForm::Star3D) {
    cx = axis_coefficients<T>(spec, 0, false);
    cy = axis_coefficients<T>(spec, 1, true);  // shared center travels with y
    if (form == KernelForm::Star3D) cz = axis_coefficients<T>(spec, 2, false);
  } else if (form == KernelForm::Box2D) {
    cbox = box_plane_coefficients<T>(spec, 0);
  } else {
    const int w = 2 * r + 1;
    cbox.reserve(static_cast<std::size_t>(w) * w * w);
    for (int kz = -r; kz <= r; ++kz) {
      const auto plane = box_plane_coefficients<T>(spec, kz);
      cbox.insert(cbox.end(), plane.begin(), plane.end());
    }
  }

  HostBlock<T> scratch(blk);
  HostBlock<T> in_y, in_x, in_z, in_box;
  const bool star = form == KernelForm::Star2D || form == KernelForm::Star3D;
  if (star) {
    in_x = HostBlock<T>({vl + 2 * r, vl, bz});
    in_y = HostBlock<T>({vl, vl + 2 * r, bz});
    if (form == KernelForm::Star3D) in_z = HostBlock<T>({vl, vl, bz + 2 * r});
  } else {
    in_box = HostBlock<T>(
        {vl + 2 * r, vl + 2 * r, form == KernelForm::Box2D ? bz : bz + 2 * r});
  }

  TileRunStats stats;
  const std::int64_t rz = spec.dims == 2 ? 0 : r;
  for (std::int64_t z0 = origin.z; z0 < origin.z + extent.z; z0 += bz)
    for (std::int64_t y0 = origin.y; y0 < origin.y + extent.y; y0 += vl)
      for (std::int64_t x0 = origin.x; x0 < origin.x + extent.x; x0 += vl) {
        if (opt.prefetch) {
          stats.prefetch_ops += emit_prefetch(e, src, Dims3{x0 - r, y0 - r, z0 - rz},
                                              Dims3{vl + 2 * r, vl + 2 * r, bz + 2 * rz},
                                              brick);
        }
        switch (form) {
          case KernelForm::Star2D:
          case KernelForm::Star3D:
            stage_block(src, Dims3{x0 - r, y0, z0}, in_x);
            axis_apply_x(e, in_x, cx, scratch, false, opt.x_pass == XPassMode::Transposed);
            stage_block(src, Dims3{x0, y0 - r, z0}, in_y);
            axis_apply_y(e, in_y, cy, scratch, true);
            if (form == KernelForm::Star3D) {
              stage_block(src, Dims3{x0, y0, z0 - r}, in_z);
              axis_apply_z(e, in_z, cz, scratch, true);
            }
            break;
          case KernelForm::Box2D:
            stage_block(src, Dims3{x0 - r, y0 - r, z0}, in_box);
            box_apply(e, in_box, cbox, r, scratch, false);
            break;
          case KernelForm::Box3D:
            stage_block(src, Dims3{x0 - r, y0 - r, z0 - r}, in_box);
            box3d_apply(e, in_box, cbox, r, scratch, false);
            break;
        }
        // Assembled result streams to the destination once per row.
        for (std::int64_t zl = 0; zl < bz; ++zl)
          for (std::int64_t y = 0; y < vl; ++y) {
            const VectorReg<T> v = e.load_row(
                &scratch.at(0, y, zl), 0, vl, vl, OpTag::Scratch,
                static_cast<std::uint64_t>(scratch.index(0, y, zl)), nullptr);
            e.store_row(out.data() + out.offset(x0, y0 + y, z0 + zl), v, vl, OpTag::Dest,
                        static_cast<std::uint64_t>(out.offset(x0, y0 + y, z0 + zl)));
          }
        ++stats.blocks;
        if (!opt.collect_trace) e.clear_trace();
      }
  return stats;
}

}  // namespace

int default_block_z(Precision p) { return default_tile_count(p); }

template <typename T>
void run_tile(TileEngine<T>& e, const StencilSpec& spec, const GridSource<T>& src,
              Grid3<T>& out, Dims3 origin, Dims3 extent, const KernelOptions& opt) {
  Dims3 brick = opt.brick;
  if (brick.x <= 0 || brick.y <= 0 || brick.z <= 0)
    brick = default_brick(sizeof(T) == 4 ? Precision::F32 : Precision::F64);
  run_tile_impl(e, spec, src, out, origin, extent, opt, brick);
}

template <typename T>
KernelResult<T> run_kernel(const StencilSpec& spec, const Grid3<T>& in,
                           const KernelOptions& opt) {
  const Precision p = sizeof(T) == 4 ? Precision::F32 : Precision::F64;
  const Dims3 interior = in.interior();
  const bool two_d = interior.z == 1;
  if ((spec.dims == 2) != two_d)
    throw ShapeError("stencil dimensionality does not match the grid");
  const Dims3 reach = spec.reach();
  for (int a = 0; a < 3; ++a) {
    if (in.halo()[a] < reach[a])
      throw HaloError(std::string("grid halo smaller than the stencil reach on ") +
                      axis_name(a));
  }
  const int vl = default_vector_length(p);
  TileEngine<T> e(vl, default_tile_count(p));
  const std::int64_t bz = two_d ? 1 : (opt.block_z > 0 ? opt.block_z : e.tile_count());
  const Dims3 blk{vl, vl, bz};
  for (int a = 0; a < 3; ++a) {
    if (interior[a] % blk[a] != 0)
      throw ShapeError(std::string("grid interior not divisible by the block shape on ") +
                       axis_name(a));
  }

  Dims3 brick = opt.brick;
  if (brick.x <= 0 || brick.y <= 0 || brick.z <= 0) brick = default_brick(p);
  if (two_d) brick.z = 1;

  KernelResult<T> res{Grid3<T>(interior, in.halo()), {}, {}, 0};

  std::optional<BrickGrid<T>> brick_storage;
  TileRunStats stats;
  if (opt.layout == Layout::Brick) {
    brick_storage.emplace(to_brick(in, brick));
    GridSource<T> src(*brick_storage);
    stats = run_tile_impl(e, spec, src, res.out, Dims3{0, 0, 0}, interior, opt, brick);
  } else {
    GridSource<T> src(in);
    stats = run_tile_impl(e, spec, src, res.out, Dims3{0, 0, 0}, interior, opt, brick);
  }

  if (opt.collect_trace) res.trace = std::move(e.trace());

  Dims3 traffic_halo = reach;
  if (opt.layout == Layout::Brick) {
    traffic_halo = Dims3{(reach.x + brick.x - 1) / brick.x * brick.x,
                         (reach.y + brick.y - 1) / brick.y * brick.y,
                         (reach.z + brick.z - 1) / brick.z * brick.z};
  }
  res.traffic = traffic_model(spec, interior, traffic_halo, p, MachineModel{});
  res.traffic.distinct_streams =
      count_streams(spec, Dims3{0, 0, 0}, blk, interior, in.halo(), opt.layout, brick);
  res.traffic.prefetch_ops = stats.prefetch_ops;
  res.blocks_processed = stats.blocks;
  return res;
}

#define MMSTENCIL_KERNELS_INST(T)                                                          \
  template void axis_apply_y<T>(TileEngine<T>&, const HostBlock<T>&, const std::vector<T>&, \
                                HostBlock<T>&, bool);                                      \
  template void axis_apply_x<T>(TileEngine<T>&, const HostBlock<T>&, const std::vector<T>&, \
                                HostBlock<T>&, bool, bool);                                \
  template void axis_apply_z<T>(TileEngine<T>&, const HostBlock<T>&, const std::vector<T>&, \
                                HostBlock<T>&, bool);                                      \
  template void box_apply<T>(TileEngine<T>&, const HostBlock<T>&, const std::vector<T>&,   \
                             int, HostBlock<T>&, bool);                                    \
  template void box3d_apply<T>(TileEngine<T>&, const HostBlock<T>&, const std::vector<T>&, \
                               int, HostBlock<T>&, bool);                                  \
  template std::vector<T> axis_coefficients<T>(const StencilSpec&, int, bool);             \
  template std::vector<T> box_plane_coefficients<T>(const StencilSpec&, int);              \
  template void run_tile<T>(TileEngine<T>&, const StencilSpec&, const GridSource<T>&,      \
                            Grid3<T>&, Dims3, Dims3, const KernelOptions&);                \
  template KernelResult<T> run_kernel<T>(const StencilSpec&, const Grid3<T>&,              \
                                         const KernelOptions&);

MMSTENCIL_KERNELS_INST(float)
MMSTENCIL_KERNELS_INST(double)
#undef MMSTENCIL_KERNELS_INST

}  // namespace mmstencil
