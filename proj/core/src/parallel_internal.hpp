// Shared internals of the halo-exchange machinery: domain validation, one
// face copy, and the z-slab-restricted exchange pass used by both the
// public exchange entry points and the pipelined drivers.
#pragma once

#include <vector>

#include "mmstencil/parallel.hpp"

namespace mmstencil {
namespace detail {

template <typename T>
void validate_domains(const std::vector<DomainField<T>>& domains, Dims3 proc, Dims3 width) {
  if (proc.x < 1 || proc.y < 1 || proc.z < 1)
    throw PlanError("process grid extents must be positive");
  if (static_cast<std::int64_t>(domains.size()) != proc.volume())
    throw PlanError("domain count does not match the process grid volume");
  for (int a = 0; a < 3; ++a)
    if (width[a] < 0) throw HaloError("exchange width must be non-negative");
  const Grid3<T>* first = domains[0].grid;
  if (first == nullptr) throw PlanError("domain grid pointer is null");
  for (std::size_t i = 0; i < domains.size(); ++i) {
    const DomainField<T>& d = domains[i];
    if (d.grid == nullptr) throw PlanError("domain grid pointer is null");
    if (!(d.grid->interior() == first->interior()) || !(d.grid->halo() == first->halo()))
      throw PlanError("domains must share interior and halo shapes");
    const std::int64_t idx = static_cast<std::int64_t>(i);
    const Dims3 expect{idx % proc.x, (idx / proc.x) % proc.y, idx / (proc.x * proc.y)};
    if (!(d.coords == expect))
      throw PlanError("domain coords do not match its position in the list");
  }
  for (int a = 0; a < 3; ++a) {
    if (width[a] > first->halo()[a])
      throw HaloError(std::string("exchange width exceeds the domain halo on ") +
                      axis_name(a));
  }
}

template <typename T>
void copy_face(DomainField<T>& dst, Dims3 dst_lo, const DomainField<T>& src, Dims3 src_lo,
               Dims3 ext, ExchangeMode mode, SdmaEngine& engine) {
  Grid3<T>& dg = *dst.grid;
  const Grid3<T>& sg = *src.grid;
  if (mode == ExchangeMode::Sdma) {
    CopyTask t;
    t.src_base = sg.data() + sg.offset(src_lo.x, src_lo.y, src_lo.z);
    t.dst_base = dg.data() + dg.offset(dst_lo.x, dst_lo.y, dst_lo.z);
    t.src_row_stride = sg.row_stride();
    t.src_plane_stride = sg.plane_stride();
    t.dst_row_stride = dg.row_stride();
    t.dst_plane_stride = dg.plane_stride();
    t.extent = ext;
    t.elem_bytes = sizeof(T);
    t.src_region = {src.arena,
                    {src_lo.x + sg.halo().x, src_lo.y + sg.halo().y, src_lo.z + sg.halo().z},
                    ext};
    t.dst_region = {dst.arena,
                    {dst_lo.x + dg.halo().x, dst_lo.y + dg.halo().y, dst_lo.z + dg.halo().z},
                    ext};
    engine.submit(t);
  } else {
    std::vector<T> buf(static_cast<std::size_t>(ext.volume()));
    std::size_t i = 0;
    for (std::int64_t z = 0; z < ext.z; ++z)
      for (std::int64_t y = 0; y < ext.y; ++y)
        for (std::int64_t x = 0; x < ext.x; ++x)
          buf[i++] = sg.at(src_lo.x + x, src_lo.y + y, src_lo.z + z);
    i = 0;
    for (std::int64_t z = 0; z < ext.z; ++z)
      for (std::int64_t y = 0; y < ext.y; ++y)
        for (std::int64_t x = 0; x < ext.x; ++x)
          dg.at(dst_lo.x + x, dst_lo.y + y, dst_lo.z + z) = buf[i++];
  }
}

// One exchange pass restricted to interior rows z in [zlo, zhi) for the x
// and y faces; z faces (full width) go out when their flag is set. Axes
// run x, then y, then z with a drain between, so later faces carry the
// halos the earlier axes just filled.
template <typename T>
void exchange_slab(std::vector<DomainField<T>>& domains, Dims3 proc, Dims3 w,
                   ExchangeMode mode, SdmaEngine& engine, std::int64_t zlo, std::int64_t zhi,
                   bool z_low_face, bool z_high_face) {
  const Dims3 n = domains[0].grid->interior();
  auto at = [&](std::int64_t cx, std::int64_t cy, std::int64_t cz) -> DomainField<T>& {
    return domains[static_cast<std::size_t>((cz * proc.y + cy) * proc.x + cx)];
  };

  if (proc.x > 1 && w.x > 0 && zhi > zlo) {
    const Dims3 ext{w.x, n.y, zhi - zlo};
    for (std::int64_t cz = 0; cz < proc.z; ++cz)
      for (std::int64_t cy = 0; cy < proc.y; ++cy)
        for (std::int64_t cx = 0; cx + 1 < proc.x; ++cx) {
          DomainField<T>& lo = at(cx, cy, cz);
          DomainField<T>& hi = at(cx + 1, cy, cz);
          copy_face(lo, {n.x, 0, zlo}, hi, {0, 0, zlo}, ext, mode, engine);
          copy_face(hi, {-w.x, 0, zlo}, lo, {n.x - w.x, 0, zlo}, ext, mode, engine);
        }
    if (mode == ExchangeMode::Sdma) engine.wait_all();
  }

  if (proc.y > 1 && w.y > 0 && zhi > zlo) {
    const Dims3 ext{n.x + 2 * w.x, w.y, zhi - zlo};
    for (std::int64_t cz = 0; cz < proc.z; ++cz)
      for (std::int64_t cy = 0; cy + 1 < proc.y; ++cy)
        for (std::int64_t cx = 0; cx < proc.x; ++cx) {
          DomainField<T>& lo = at(cx, cy, cz);
          DomainField<T>& hi = at(cx, cy + 1, cz);
          copy_face(lo, {-w.x, n.y, zlo}, hi, {-w.x, 0, zlo}, ext, mode, engine);
          copy_face(hi, {-w.x, -w.y, zlo}, lo, {-w.x, n.y - w.y, zlo}, ext, mode, engine);
        }
    if (mode == ExchangeMode::Sdma) engine.wait_all();
  }

  if (proc.z > 1 && w.z > 0 && (z_low_face || z_high_face)) {
    const Dims3 ext{n.x + 2 * w.x, n.y + 2 * w.y, w.z};
    for (std::int64_t cz = 0; cz + 1 < proc.z; ++cz)
      for (std::int64_t cy = 0; cy < proc.y; ++cy)
        for (std::int64_t cx = 0; cx < proc.x; ++cx) {
          DomainField<T>& lo = at(cx, cy, cz);
          DomainField<T>& hi = at(cx, cy, cz + 1);
          if (z_high_face)
            copy_face(lo, {-w.x, -w.y, n.z}, hi, {-w.x, -w.y, 0}, ext, mode, engine);
          if (z_low_face)
            copy_face(hi, {-w.x, -w.y, -w.z}, lo, {-w.x, -w.y, n.z - w.z}, ext, mode,
                      engine);
        }
    if (mode == ExchangeMode::Sdma) engine.wait_all();
  }
}

}  // namespace detail
}  // namespace mmstencil
