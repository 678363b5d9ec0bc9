#include "mmstencil/grid.hpp"

namespace mmstencil {

template <typename T>
BrickGrid<T> to_brick(const Grid3<T>& g, Dims3 brick) {
  BrickGrid<T> b(g.interior(), g.halo(), brick);
  const Dims3& pad = g.padded();
  const Dims3& h = g.halo();
  for (std::int64_t z = -h.z; z < pad.z - h.z; ++z)
    for (std::int64_t y = -h.y; y < pad.y - h.y; ++y)
      for (std::int64_t x = -h.x; x < pad.x - h.x; ++x)
        b.at(x, y, z) = g.at(x, y, z);
  return b;
}

template <typename T>
Grid3<T> from_brick(const BrickGrid<T>& b) {
  Grid3<T> g(b.interior(), b.halo());
  const Dims3& pad = b.padded();
  const Dims3& h = b.halo();
  for (std::int64_t z = -h.z; z < pad.z - h.z; ++z)
    for (std::int64_t y = -h.y; y < pad.y - h.y; ++y)
      for (std::int64_t x = -h.x; x < pad.x - h.x; ++x)
        g.at(x, y, z) = b.at(x, y, z);
  return g;
}

template BrickGrid<float> to_brick(const Grid3<float>&, Dims3);
template BrickGrid<double> to_brick(const Grid3<double>&, Dims3);
template Grid3<float> from_brick(const BrickGrid<float>&);
template Grid3<double> from_brick(const BrickGrid<double>&);

Dims3 fit_halo(Dims3 interior, Dims3 min_halo, Dims3 divisor) {
  Dims3 halo = min_halo;
  for (int a = 0; a < 3; ++a) {
    if (divisor[a] <= 1) continue;
    while ((interior[a] + 2 * halo[a]) % divisor[a] != 0) ++halo[a];
  }
  return halo;
}

}  // namespace mmstencil
