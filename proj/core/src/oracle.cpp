#include "mmstencil/oracle.hpp"

namespace mmstencil {

template <typename T>
Grid3<T> oracle_apply(const StencilSpec& spec, const Grid3<T>& in) {
  const Dims3 reach = spec.reach();
  const Dims3& halo = in.halo();
  for (int a = 0; a < 3; ++a)
    if (halo[a] < reach[a])
      throw HaloError(std::string("input halo ") + std::to_string(halo[a]) +
                      " smaller than stencil reach " + std::to_string(reach[a]) +
                      " on axis " + axis_name(a));

  Grid3<T> out(in.interior(), in.halo());
  const Dims3& n = in.interior();
  const std::int64_t row = in.row_stride();
  const std::int64_t plane = in.plane_stride();

  // Per-entry linear deltas so the inner loop is a flat sweep.
  std::vector<std::int64_t> delta(spec.entries.size());
  std::vector<double> w(spec.entries.size());
  for (std::size_t i = 0; i < spec.entries.size(); ++i) {
    const Dims3& o = spec.entries[i].offset;
    delta[i] = o.z * plane + o.y * row + o.x;
    w[i] = spec.entries[i].value;
  }

  const T* src = in.data();
  T* dst = out.data();
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y) {
      const std::int64_t base = in.offset(0, y, z);
      for (std::int64_t x = 0; x < n.x; ++x) {
        double acc = 0.0;
        for (std::size_t i = 0; i < delta.size(); ++i)
          acc += w[i] * static_cast<double>(src[base + x + delta[i]]);
        dst[base + x] = static_cast<T>(acc);
      }
    }
  return out;
}

template Grid3<float> oracle_apply(const StencilSpec&, const Grid3<float>&);
template Grid3<double> oracle_apply(const StencilSpec&, const Grid3<double>&);

}  // namespace mmstencil
