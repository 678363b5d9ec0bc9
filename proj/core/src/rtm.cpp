// VTI/TTI wave propagation: block derivative composition on the tile
// engine, leapfrog stepping, naive reference steps, and the decomposed
// driver with layered exchange/compute overlap.

#include "mmstencil/rtm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmstencil/analysis.hpp"
#include "mmstencil/grid_io.hpp"
#include "parallel_internal.hpp"

namespace mmstencil {

namespace {

template <typename T>
constexpr Precision precision_of() {
  return sizeof(T) == 4 ? Precision::F32 : Precision::F64;
}

// Copies a box starting at `lo` (interior coordinates) into dst; reads
// outside the padded grid produce zero, so callers can stage slots that
// stick out past the halo.
template <typename T>
void stage_block(const Grid3<T>& g, Dims3 lo, HostBlock<T>& dst) {
  const Dims3 n = g.interior();
  const Dims3 h = g.halo();
  const std::int64_t ex = dst.extents.x;
  const std::int64_t xlo = std::max<std::int64_t>(0, -h.x - lo.x);
  const std::int64_t xhi = std::min<std::int64_t>(ex, n.x + h.x - lo.x);
  for (std::int64_t z = 0; z < dst.extents.z; ++z)
    for (std::int64_t y = 0; y < dst.extents.y; ++y) {
      T* row = &dst.at(0, y, z);
      const std::int64_t gy = lo.y + y;
      const std::int64_t gz = lo.z + z;
      if (gy < -h.y || gy >= n.y + h.y || gz < -h.z || gz >= n.z + h.z || xlo >= xhi) {
        std::fill(row, row + ex, T(0));
        continue;
      }
      std::fill(row, row + xlo, T(0));
      const T* src = &g.at(lo.x + xlo, gy, gz);
      std::copy(src, src + (xhi - xlo), row + xlo);
      std::fill(row + xhi, row + ex, T(0));
    }
}

template <typename T>
void require_same_shape(const Grid3<T>& ref, const Grid3<T>& g, const char* name) {
  if (!(g.interior() == ref.interior()) || !(g.halo() == ref.halo()))
    throw ShapeError(std::string("model grid '") + name +
                     "' does not share the field interior and halo");
}

template <typename T>
void validate_vti(const VtiModel<T>& m) {
  const Grid3<T>& f = m.sh;
  if (f.interior().x < 1 || f.interior().y < 1 || f.interior().z < 1)
    throw ShapeError("vti model grid is empty");
  if (m.radius < 1) throw ConfigError("stencil radius must be positive");
  require_same_shape(f, m.sh_prev, "sh_prev");
  require_same_shape(f, m.sv, "sv");
  require_same_shape(f, m.sv_prev, "sv_prev");
  require_same_shape(f, m.vp, "vp");
  require_same_shape(f, m.eps, "eps");
  require_same_shape(f, m.delta, "delta");
  const Dims3 h = f.halo();
  if (h.x < m.radius || h.y < m.radius || h.z < m.radius)
    throw HaloError("field halo is narrower than the stencil radius");
  if (!(m.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(m.hx > 0.0) || !(m.hy > 0.0) || !(m.hz > 0.0))
    throw ConfigError("grid spacings must be positive");
}

template <typename T>
void validate_tti(const TtiModel<T>& m) {
  const Grid3<T>& f = m.p;
  if (f.interior().x < 1 || f.interior().y < 1 || f.interior().z < 1)
    throw ShapeError("tti model grid is empty");
  if (m.radius < 1) throw ConfigError("stencil radius must be positive");
  require_same_shape(f, m.p_prev, "p_prev");
  require_same_shape(f, m.q, "q");
  require_same_shape(f, m.q_prev, "q_prev");
  require_same_shape(f, m.vpx, "vpx");
  require_same_shape(f, m.vpz, "vpz");
  require_same_shape(f, m.vpn, "vpn");
  require_same_shape(f, m.vsz, "vsz");
  require_same_shape(f, m.alpha, "alpha");
  require_same_shape(f, m.theta, "theta");
  require_same_shape(f, m.phi, "phi");
  const Dims3 h = f.halo();
  if (h.x < m.radius || h.y < m.radius || h.z < m.radius)
    throw HaloError("field halo is narrower than the stencil radius");
  if (!(m.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(m.hx > 0.0) || !(m.hy > 0.0) || !(m.hz > 0.0))
    throw ConfigError("grid spacings must be positive");
}

void require_blockable(Dims3 n, int vl, std::int64_t bz) {
  if (n.x % vl)
    throw ShapeError("interior x extent must be a multiple of the vector length");
  if (n.y % vl)
    throw ShapeError("interior y extent must be a multiple of the vector length");
  if (n.z % bz) throw ShapeError("interior z extent must be a multiple of the block depth");
}

template <typename M>
StepInfo make_step_info(const M& m, double vmax) {
  StepInfo s;
  s.dt_limit = cfl_dt_limit(m.radius, vmax, m.hx, m.hy, m.hz);
  s.dt_within_limit = m.dt <= s.dt_limit;
  return s;
}

template <typename T>
double max_abs_interior(const Grid3<T>& g) {
  const Dims3 n = g.interior();
  double r = 0.0;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x)
        r = std::max(r, std::abs(static_cast<double>(g.at(x, y, z))));
  return r;
}

}  // namespace

template <typename T>
DerivTables<T> make_deriv_tables(int radius, double hx, double hy, double hz) {
  auto conv = [](const CoefficientTable& c) {
    std::vector<T> v;
    v.reserve(c.coeffs.size());
    for (const auto& e : c.coeffs) v.push_back(static_cast<T>(e.value));
    return v;
  };
  DerivTables<T> t;
  t.radius = radius;
  t.first_x = conv(generate_fd_coefficients(radius, Derivative::First, hx));
  t.first_y = conv(generate_fd_coefficients(radius, Derivative::First, hy));
  t.first_z = conv(generate_fd_coefficients(radius, Derivative::First, hz));
  t.second_x = conv(generate_fd_coefficients(radius, Derivative::Second, hx));
  t.second_y = conv(generate_fd_coefficients(radius, Derivative::Second, hy));
  t.second_z = conv(generate_fd_coefficients(radius, Derivative::Second, hz));
  return t;
}

template <typename T>
void derivatives_block(TileEngine<T>& e, const Grid3<T>& p, Dims3 origin, Dims3 extent,
                       const DerivTables<T>& tables, DerivativeSet<T>& out) {
  const int vl = e.vector_length();
  const int r = tables.radius;
  if (r < 1) throw ConfigError("derivative tables are empty");
  if (extent.x != vl || extent.y != vl)
    throw ShapeError("derivative block x and y extents must equal the vector length");
  if (extent.z < 1 || extent.z > vl)
    throw ShapeError("derivative block depth must lie in [1, vector length]");
  if (r > vl) throw ShapeError("stencil radius exceeds the vector length");
  if (origin.x % extent.x || origin.y % extent.y || origin.z % extent.z)
    throw ShapeError("derivative block origin is not block-aligned");
  const Dims3 h = p.halo();
  if (h.x < r || h.y < r || h.z < r)
    throw HaloError("grid halo is narrower than the stencil radius");

  const std::int64_t vx = extent.x, vy = extent.y, vz = extent.z;
  if (!(out.extents == extent)) {
    out.extents = extent;
    out.dxx = HostBlock<T>(extent);
    out.dyy = HostBlock<T>(extent);
    out.dzz = HostBlock<T>(extent);
    out.dxy = HostBlock<T>(extent);
    out.dxz = HostBlock<T>(extent);
    out.dyz = HostBlock<T>(extent);
    out.dz = HostBlock<T>(Dims3{vx, vy + 2 * r, vz});
    out.dy = HostBlock<T>(Dims3{vx + 2 * r, vy, vz});
  }

  HostBlock<T> pz(Dims3{vx, vy + 2 * r, vz + 2 * r});
  HostBlock<T> py(Dims3{vx, vy + 2 * r, vz});
  HostBlock<T> dzs[3] = {HostBlock<T>(Dims3{vx, vy + 2 * r, vz}),
                         HostBlock<T>(Dims3{vx, vy + 2 * r, vz}),
                         HostBlock<T>(Dims3{vx, vy + 2 * r, vz})};
  HostBlock<T> dys[3] = {HostBlock<T>(extent), HostBlock<T>(extent), HostBlock<T>(extent)};
  HostBlock<T> dz_x(Dims3{vx + 2 * r, vy, vz});
  HostBlock<T> in_x(Dims3{vx + 2 * r, vy, vz});
  HostBlock<T> in_z(Dims3{vx, vy, vz + 2 * r});

  // First-derivative z and y passes over the previous, current and next
  // vector-length-wide column slots. Slot columns that fall outside the
  // padded grid stage as zero; the assembly below only consumes the r
  // boundary columns of each neighbor slot, which are always real cells.
  for (int s = 0; s < 3; ++s) {
    const std::int64_t sx = origin.x + static_cast<std::int64_t>(s - 1) * vx;
    stage_block(p, Dims3{sx, origin.y - r, origin.z - r}, pz);
    axis_apply_z(e, pz, tables.first_z, dzs[s], false);
    stage_block(p, Dims3{sx, origin.y - r, origin.z}, py);
    axis_apply_y(e, py, tables.first_y, dys[s], false);
    if (s == 1) {
      axis_apply_y(e, py, tables.second_y, out.dyy, false);
      out.dz = dzs[1];
      axis_apply_y(e, dzs[1], tables.first_y, out.dyz, false);
    }
  }

  // Assemble the x-extended intermediates from the three slots.
  for (std::int64_t z = 0; z < vz; ++z)
    for (std::int64_t y = 0; y < vy; ++y) {
      for (std::int64_t x = 0; x < r; ++x) {
        dz_x.at(x, y, z) = dzs[0].at(vx - r + x, y + r, z);
        dz_x.at(r + vx + x, y, z) = dzs[2].at(x, y + r, z);
        out.dy.at(x, y, z) = dys[0].at(vx - r + x, y, z);
        out.dy.at(r + vx + x, y, z) = dys[2].at(x, y, z);
      }
      for (std::int64_t x = 0; x < vx; ++x) {
        dz_x.at(r + x, y, z) = dzs[1].at(x, y + r, z);
        out.dy.at(r + x, y, z) = dys[1].at(x, y, z);
      }
    }

  axis_apply_x(e, dz_x, tables.first_x, out.dxz, false, true);
  axis_apply_x(e, out.dy, tables.first_x, out.dxy, false, true);

  stage_block(p, Dims3{origin.x - r, origin.y, origin.z}, in_x);
  axis_apply_x(e, in_x, tables.second_x, out.dxx, false, true);
  stage_block(p, Dims3{origin.x, origin.y, origin.z - r}, in_z);
  axis_apply_z(e, in_z, tables.second_z, out.dzz, false);
}

template <typename T>
VtiModel<T> make_vti_model(Dims3 interior, int radius, double hx, double hy, double hz,
                           double dt) {
  if (radius < 1) throw ConfigError("stencil radius must be positive");
  const Dims3 h{radius, radius, radius};
  VtiModel<T> m;
  m.sh = Grid3<T>(interior, h);
  m.sh_prev = Grid3<T>(interior, h);
  m.sv = Grid3<T>(interior, h);
  m.sv_prev = Grid3<T>(interior, h);
  m.vp = Grid3<T>(interior, h);
  m.eps = Grid3<T>(interior, h);
  m.delta = Grid3<T>(interior, h);
  m.hx = hx;
  m.hy = hy;
  m.hz = hz;
  m.dt = dt;
  m.radius = radius;
  return m;
}

template <typename T>
TtiModel<T> make_tti_model(Dims3 interior, int radius, double hx, double hy, double hz,
                           double dt) {
  if (radius < 1) throw ConfigError("stencil radius must be positive");
  const Dims3 h{radius, radius, radius};
  TtiModel<T> m;
  m.p = Grid3<T>(interior, h);
  m.p_prev = Grid3<T>(interior, h);
  m.q = Grid3<T>(interior, h);
  m.q_prev = Grid3<T>(interior, h);
  m.vpx = Grid3<T>(interior, h);
  m.vpz = Grid3<T>(interior, h);
  m.vpn = Grid3<T>(interior, h);
  m.vsz = Grid3<T>(interior, h);
  m.alpha = Grid3<T>(interior, h);
  m.theta = Grid3<T>(interior, h);
  m.phi = Grid3<T>(interior, h);
  m.hx = hx;
  m.hy = hy;
  m.hz = hz;
  m.dt = dt;
  m.radius = radius;
  return m;
}

double cfl_dt_limit(int radius, double vmax, double hx, double hy, double hz) {
  if (!(vmax > 0.0)) return std::numeric_limits<double>::infinity();
  const CoefficientTable t = generate_fd_coefficients(radius, Derivative::Second, 1.0);
  double s = 0.0;
  for (const auto& c : t.coeffs) s += std::abs(c.value);
  const double k = 1.0 / (hx * hx) + 1.0 / (hy * hy) + 1.0 / (hz * hz);
  return 2.0 / (vmax * std::sqrt(s * k));
}

template <typename T>
double vti_velocity_max(const VtiModel<T>& m) {
  const Dims3 n = m.vp.interior();
  double vmax = 0.0;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        const double e = static_cast<double>(m.eps.at(x, y, z));
        const double d = static_cast<double>(m.delta.at(x, y, z));
        const double boost = std::max(0.0, std::max(e, d));
        const double v =
            static_cast<double>(m.vp.at(x, y, z)) * std::sqrt(1.0 + 2.0 * boost);
        vmax = std::max(vmax, v);
      }
  return vmax;
}

template <typename T>
double tti_velocity_max(const TtiModel<T>& m) {
  // Conservative phase-velocity bound: the largest of the four velocity
  // fields anywhere in the medium.
  const Dims3 n = m.vpx.interior();
  double vmax = 0.0;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        vmax = std::max(vmax, std::abs(static_cast<double>(m.vpx.at(x, y, z))));
        vmax = std::max(vmax, std::abs(static_cast<double>(m.vpz.at(x, y, z))));
        vmax = std::max(vmax, std::abs(static_cast<double>(m.vpn.at(x, y, z))));
        vmax = std::max(vmax, std::abs(static_cast<double>(m.vsz.at(x, y, z))));
      }
  return vmax;
}

template <typename T>
void vti_sweep(TileEngine<T>& e, VtiModel<T>& m, const DerivTables<T>& t, Dims3 origin,
               Dims3 extent) {
  const int vl = e.vector_length();
  const int r = t.radius;
  if (extent.x != vl || extent.y != vl)
    throw ShapeError("sweep block x and y extents must equal the vector length");
  if (extent.z < 1 || extent.z > vl)
    throw ShapeError("sweep block depth must lie in [1, vector length]");
  if (origin.x % extent.x || origin.y % extent.y || origin.z % extent.z)
    throw ShapeError("sweep block origin is not block-aligned");

  const std::int64_t vx = extent.x, vy = extent.y, vz = extent.z;
  HostBlock<T> in_x(Dims3{vx + 2 * r, vy, vz});
  HostBlock<T> in_y(Dims3{vx, vy + 2 * r, vz});
  HostBlock<T> in_z(Dims3{vx, vy, vz + 2 * r});
  HostBlock<T> lap(extent);
  HostBlock<T> dzz(extent);
  const double dt2 = m.dt * m.dt;

  // Both stress updates are driven by the same two derivative fields: the
  // horizontal Laplacian of sigma_H and the vertical second derivative of
  // sigma_V. Only the Thomsen weights differ, and the vertical equation
  // keeps a unit weight on its own vertical term so purely vertical
  // propagation runs at V_p; this coupling keeps the system self-adjoint
  // up to a positive scaling (non-negative symbol for eps >= delta), which
  // the swapped-role variant is not.
  stage_block(m.sh, Dims3{origin.x - r, origin.y, origin.z}, in_x);
  axis_apply_x(e, in_x, t.second_x, lap, false, true);
  stage_block(m.sh, Dims3{origin.x, origin.y - r, origin.z}, in_y);
  axis_apply_y(e, in_y, t.second_y, lap, true);
  stage_block(m.sv, Dims3{origin.x, origin.y, origin.z - r}, in_z);
  axis_apply_z(e, in_z, t.second_z, dzz, false);
  for (std::int64_t z = 0; z < vz; ++z)
    for (std::int64_t y = 0; y < vy; ++y)
      for (std::int64_t x = 0; x < vx; ++x) {
        const std::int64_t gx = origin.x + x;
        const std::int64_t gy = origin.y + y;
        const std::int64_t gz = origin.z + z;
        const double a = 1.0 + 2.0 * static_cast<double>(m.eps.at(gx, gy, gz));
        const double b =
            std::sqrt(1.0 + 2.0 * static_cast<double>(m.delta.at(gx, gy, gz)));
        const double vp = static_cast<double>(m.vp.at(gx, gy, gz));
        const double l = static_cast<double>(lap.at(x, y, z));
        const double d = static_cast<double>(dzz.at(x, y, z));
        const double rh = vp * vp * (a * l + b * d);
        const double rv = vp * vp * (b * l + d);
        m.sh_prev.at(gx, gy, gz) =
            static_cast<T>(2.0 * static_cast<double>(m.sh.at(gx, gy, gz)) -
                           static_cast<double>(m.sh_prev.at(gx, gy, gz)) + dt2 * rh);
        m.sv_prev.at(gx, gy, gz) =
            static_cast<T>(2.0 * static_cast<double>(m.sv.at(gx, gy, gz)) -
                           static_cast<double>(m.sv_prev.at(gx, gy, gz)) + dt2 * rv);
      }
  e.clear_trace();
}

template <typename T>
void vti_swap(VtiModel<T>& m) {
  std::swap(m.sh, m.sh_prev);
  std::swap(m.sv, m.sv_prev);
}

template <typename T>
StepInfo vti_step(VtiModel<T>& m) {
  validate_vti(m);
  const Precision pr = precision_of<T>();
  TileEngine<T> e(default_vector_length(pr), default_tile_count(pr));
  const int vl = e.vector_length();
  const std::int64_t bz = e.tile_count();
  const Dims3 n = m.sh.interior();
  require_blockable(n, vl, bz);
  const DerivTables<T> t = make_deriv_tables<T>(m.radius, m.hx, m.hy, m.hz);
  for (std::int64_t z0 = 0; z0 < n.z; z0 += bz)
    for (std::int64_t y0 = 0; y0 < n.y; y0 += vl)
      for (std::int64_t x0 = 0; x0 < n.x; x0 += vl)
        vti_sweep(e, m, t, Dims3{x0, y0, z0}, Dims3{vl, vl, bz});
  vti_swap(m);
  return make_step_info(m, vti_velocity_max(m));
}

template <typename T>
StepInfo vti_step_reference(VtiModel<T>& m) {
  validate_vti(m);
  const int r = m.radius;
  const auto cx = generate_fd_coefficients(r, Derivative::Second, m.hx).values();
  const auto cy = generate_fd_coefficients(r, Derivative::Second, m.hy).values();
  const auto cz = generate_fd_coefficients(r, Derivative::Second, m.hz).values();
  const Dims3 n = m.sh.interior();
  const double dt2 = m.dt * m.dt;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        double lap_h = 0.0, dzz_v = 0.0;
        for (int k = -r; k <= r; ++k) {
          lap_h += cx[static_cast<std::size_t>(k + r)] *
                       static_cast<double>(m.sh.at(x + k, y, z)) +
                   cy[static_cast<std::size_t>(k + r)] *
                       static_cast<double>(m.sh.at(x, y + k, z));
          dzz_v += cz[static_cast<std::size_t>(k + r)] *
                   static_cast<double>(m.sv.at(x, y, z + k));
        }
        const double a = 1.0 + 2.0 * static_cast<double>(m.eps.at(x, y, z));
        const double b = std::sqrt(1.0 + 2.0 * static_cast<double>(m.delta.at(x, y, z)));
        const double vp2 = static_cast<double>(m.vp.at(x, y, z)) *
                           static_cast<double>(m.vp.at(x, y, z));
        const double rh = vp2 * (a * lap_h + b * dzz_v);
        const double rv = vp2 * (b * lap_h + dzz_v);
        m.sh_prev.at(x, y, z) =
            static_cast<T>(2.0 * static_cast<double>(m.sh.at(x, y, z)) -
                           static_cast<double>(m.sh_prev.at(x, y, z)) + dt2 * rh);
        m.sv_prev.at(x, y, z) =
            static_cast<T>(2.0 * static_cast<double>(m.sv.at(x, y, z)) -
                           static_cast<double>(m.sv_prev.at(x, y, z)) + dt2 * rv);
      }
  vti_swap(m);
  return make_step_info(m, vti_velocity_max(m));
}

template <typename T>
void tti_update_aux(const TtiModel<T>& m, TtiAux<T>& aux, std::int64_t zlo,
                    std::int64_t zhi) {
  const Dims3 n = m.p.interior();
  const Dims3 h = m.p.halo();
  zlo = std::max(zlo, -h.z);
  zhi = std::min(zhi, n.z + h.z);
  for (std::int64_t z = zlo; z < zhi; ++z)
    for (std::int64_t y = -h.y; y < n.y + h.y; ++y)
      for (std::int64_t x = -h.x; x < n.x + h.x; ++x) {
        const double a = static_cast<double>(m.alpha.at(x, y, z));
        const double pv = static_cast<double>(m.p.at(x, y, z));
        const double qv = static_cast<double>(m.q.at(x, y, z));
        aux.r1.at(x, y, z) = static_cast<T>(pv - a * qv);
        aux.r2.at(x, y, z) = static_cast<T>(a == 0.0 ? 0.0 : pv / a - qv);
      }
}

template <typename T>
void tti_sweep(TileEngine<T>& e, TtiModel<T>& m, const TtiAux<T>& aux,
               const DerivTables<T>& t, Dims3 origin, Dims3 extent, TtiScratch<T>& s) {
  derivatives_block(e, m.p, origin, extent, t, s.p);
  derivatives_block(e, m.q, origin, extent, t, s.q);
  derivatives_block(e, aux.r1, origin, extent, t, s.r1);
  derivatives_block(e, aux.r2, origin, extent, t, s.r2);

  const double dt2 = m.dt * m.dt;
  for (std::int64_t z = 0; z < extent.z; ++z)
    for (std::int64_t y = 0; y < extent.y; ++y)
      for (std::int64_t x = 0; x < extent.x; ++x) {
        const std::int64_t gx = origin.x + x;
        const std::int64_t gy = origin.y + y;
        const std::int64_t gz = origin.z + z;
        const double th = static_cast<double>(m.theta.at(gx, gy, gz));
        const double ph = static_cast<double>(m.phi.at(gx, gy, gz));
        const double st = std::sin(th), ct = std::cos(th);
        const double sp = std::sin(ph), cp = std::cos(ph);
        const double s2t = st * st, c2t = ct * ct;
        const double s2p = sp * sp, c2p = cp * cp;
        const double sin2t = 2.0 * st * ct, sin2p = 2.0 * sp * cp;
        // Rotated vertical operator; theta = 0 collapses it to d2/dz2
        // exactly because every other term carries an exact zero factor.
        auto h1 = [&](const DerivativeSet<T>& d) {
          return s2t * c2p * static_cast<double>(d.dxx.at(x, y, z)) +
                 s2t * s2p * static_cast<double>(d.dyy.at(x, y, z)) +
                 c2t * static_cast<double>(d.dzz.at(x, y, z)) +
                 s2t * sin2p * static_cast<double>(d.dxy.at(x, y, z)) +
                 sin2t * sp * static_cast<double>(d.dyz.at(x, y, z)) +
                 sin2t * cp * static_cast<double>(d.dxz.at(x, y, z));
        };
        auto trace3 = [&](const DerivativeSet<T>& d) {
          return static_cast<double>(d.dxx.at(x, y, z)) +
                 static_cast<double>(d.dyy.at(x, y, z)) +
                 static_cast<double>(d.dzz.at(x, y, z));
        };
        const double h2p = trace3(s.p) - h1(s.p);
        const double h1q = h1(s.q);
        const double h1r1 = h1(s.r1);
        const double h2r2 = trace3(s.r2) - h1(s.r2);
        const double a = static_cast<double>(m.alpha.at(gx, gy, gz));
        const double vpx = static_cast<double>(m.vpx.at(gx, gy, gz));
        const double vpz = static_cast<double>(m.vpz.at(gx, gy, gz));
        const double vpn = static_cast<double>(m.vpn.at(gx, gy, gz));
        const double vsz = static_cast<double>(m.vsz.at(gx, gy, gz));
        const double ptt = vpx * vpx * h2p + a * vpz * vpz * h1q + vsz * vsz * h1r1;
        const double qtt = (a == 0.0 ? 0.0 : vpn * vpn / a * h2p) + vpz * vpz * h1q -
                           vsz * vsz * h2r2;
        m.p_prev.at(gx, gy, gz) =
            static_cast<T>(2.0 * static_cast<double>(m.p.at(gx, gy, gz)) -
                           static_cast<double>(m.p_prev.at(gx, gy, gz)) + dt2 * ptt);
        m.q_prev.at(gx, gy, gz) =
            static_cast<T>(2.0 * static_cast<double>(m.q.at(gx, gy, gz)) -
                           static_cast<double>(m.q_prev.at(gx, gy, gz)) + dt2 * qtt);
      }
  e.clear_trace();
}

template <typename T>
void tti_swap(TtiModel<T>& m) {
  std::swap(m.p, m.p_prev);
  std::swap(m.q, m.q_prev);
}

template <typename T>
StepInfo tti_step(TtiModel<T>& m) {
  validate_tti(m);
  const Precision pr = precision_of<T>();
  TileEngine<T> e(default_vector_length(pr), default_tile_count(pr));
  const int vl = e.vector_length();
  const std::int64_t bz = e.tile_count();
  const Dims3 n = m.p.interior();
  const Dims3 h = m.p.halo();
  require_blockable(n, vl, bz);
  const DerivTables<T> t = make_deriv_tables<T>(m.radius, m.hx, m.hy, m.hz);
  TtiAux<T> aux{Grid3<T>(n, h), Grid3<T>(n, h)};
  tti_update_aux(m, aux, -h.z, n.z + h.z);
  TtiScratch<T> s;
  for (std::int64_t z0 = 0; z0 < n.z; z0 += bz)
    for (std::int64_t y0 = 0; y0 < n.y; y0 += vl)
      for (std::int64_t x0 = 0; x0 < n.x; x0 += vl)
        tti_sweep(e, m, aux, t, Dims3{x0, y0, z0}, Dims3{vl, vl, bz}, s);
  tti_swap(m);
  return make_step_info(m, tti_velocity_max(m));
}

namespace {

// Naive double-precision derivatives of one field over the full interior,
// mixed terms composed exactly as documented: first-derivative interme-
// diates over x/y-extended boxes, then the outer first derivative.
struct RefDerivs {
  std::int64_t nx = 0, ny = 0, nz = 0;
  std::vector<double> xx, yy, zz, xy, xz, yz;
  std::size_t idx(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<std::size_t>((z * ny + y) * nx + x);
  }
};

template <typename T>
RefDerivs reference_derivatives(const Grid3<T>& g, int r, double hx, double hy, double hz) {
  const auto c1x = generate_fd_coefficients(r, Derivative::First, hx).values();
  const auto c1y = generate_fd_coefficients(r, Derivative::First, hy).values();
  const auto c1z = generate_fd_coefficients(r, Derivative::First, hz).values();
  const auto c2x = generate_fd_coefficients(r, Derivative::Second, hx).values();
  const auto c2y = generate_fd_coefficients(r, Derivative::Second, hy).values();
  const auto c2z = generate_fd_coefficients(r, Derivative::Second, hz).values();
  const Dims3 n = g.interior();
  RefDerivs d;
  d.nx = n.x;
  d.ny = n.y;
  d.nz = n.z;
  const std::size_t vol = static_cast<std::size_t>(n.volume());
  d.xx.assign(vol, 0.0);
  d.yy.assign(vol, 0.0);
  d.zz.assign(vol, 0.0);
  d.xy.assign(vol, 0.0);
  d.xz.assign(vol, 0.0);
  d.yz.assign(vol, 0.0);

  const std::int64_t ex = n.x + 2 * r;
  const std::int64_t ey = n.y + 2 * r;
  std::vector<double> dzb(static_cast<std::size_t>(ex * ey * n.z), 0.0);
  std::vector<double> dyb(static_cast<std::size_t>(ex * n.y * n.z), 0.0);
  auto dzat = [&](std::int64_t x, std::int64_t y, std::int64_t z) -> double& {
    return dzb[static_cast<std::size_t>((z * ey + (y + r)) * ex + (x + r))];
  };
  auto dyat = [&](std::int64_t x, std::int64_t y, std::int64_t z) -> double& {
    return dyb[static_cast<std::size_t>((z * n.y + y) * ex + (x + r))];
  };

  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = -r; y < n.y + r; ++y)
      for (std::int64_t x = -r; x < n.x + r; ++x) {
        double s = 0.0;
        for (int k = -r; k <= r; ++k)
          s += c1z[static_cast<std::size_t>(k + r)] *
               static_cast<double>(g.at(x, y, z + k));
        dzat(x, y, z) = s;
      }
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = -r; x < n.x + r; ++x) {
        double s = 0.0;
        for (int k = -r; k <= r; ++k)
          s += c1y[static_cast<std::size_t>(k + r)] *
               static_cast<double>(g.at(x, y + k, z));
        dyat(x, y, z) = s;
      }

  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        double xx = 0.0, yy = 0.0, zz = 0.0, xy = 0.0, xz = 0.0, yz = 0.0;
        for (int k = -r; k <= r; ++k) {
          const std::size_t i = static_cast<std::size_t>(k + r);
          xx += c2x[i] * static_cast<double>(g.at(x + k, y, z));
          yy += c2y[i] * static_cast<double>(g.at(x, y + k, z));
          zz += c2z[i] * static_cast<double>(g.at(x, y, z + k));
          xy += c1x[i] * dyat(x + k, y, z);
          xz += c1x[i] * dzat(x + k, y, z);
          yz += c1y[i] * dzat(x, y + k, z);
        }
        const std::size_t i = d.idx(x, y, z);
        d.xx[i] = xx;
        d.yy[i] = yy;
        d.zz[i] = zz;
        d.xy[i] = xy;
        d.xz[i] = xz;
        d.yz[i] = yz;
      }
  return d;
}

}  // namespace

template <typename T>
StepInfo tti_step_reference(TtiModel<T>& m) {
  validate_tti(m);
  const int r = m.radius;
  const Dims3 n = m.p.interior();
  const Dims3 h = m.p.halo();
  TtiAux<T> aux{Grid3<T>(n, h), Grid3<T>(n, h)};
  tti_update_aux(m, aux, -h.z, n.z + h.z);
  const RefDerivs dp = reference_derivatives(m.p, r, m.hx, m.hy, m.hz);
  const RefDerivs dq = reference_derivatives(m.q, r, m.hx, m.hy, m.hz);
  const RefDerivs dr1 = reference_derivatives(aux.r1, r, m.hx, m.hy, m.hz);
  const RefDerivs dr2 = reference_derivatives(aux.r2, r, m.hx, m.hy, m.hz);
  const double dt2 = m.dt * m.dt;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        const double th = static_cast<double>(m.theta.at(x, y, z));
        const double ph = static_cast<double>(m.phi.at(x, y, z));
        const double st = std::sin(th), ct = std::cos(th);
        const double sp = std::sin(ph), cp = std::cos(ph);
        const double s2t = st * st, c2t = ct * ct;
        const double s2p = sp * sp, c2p = cp * cp;
        const double sin2t = 2.0 * st * ct, sin2p = 2.0 * sp * cp;
        const std::size_t i = dp.idx(x, y, z);
        auto h1 = [&](const RefDerivs& d) {
          return s2t * c2p * d.xx[i] + s2t * s2p * d.yy[i] + c2t * d.zz[i] +
                 s2t * sin2p * d.xy[i] + sin2t * sp * d.yz[i] + sin2t * cp * d.xz[i];
        };
        auto trace3 = [&](const RefDerivs& d) { return d.xx[i] + d.yy[i] + d.zz[i]; };
        const double h2p = trace3(dp) - h1(dp);
        const double h1q = h1(dq);
        const double h1r1 = h1(dr1);
        const double h2r2 = trace3(dr2) - h1(dr2);
        const double a = static_cast<double>(m.alpha.at(x, y, z));
        const double vpx = static_cast<double>(m.vpx.at(x, y, z));
        const double vpz = static_cast<double>(m.vpz.at(x, y, z));
        const double vpn = static_cast<double>(m.vpn.at(x, y, z));
        const double vsz = static_cast<double>(m.vsz.at(x, y, z));
        const double ptt = vpx * vpx * h2p + a * vpz * vpz * h1q + vsz * vsz * h1r1;
        const double qtt = (a == 0.0 ? 0.0 : vpn * vpn / a * h2p) + vpz * vpz * h1q -
                           vsz * vsz * h2r2;
        m.p_prev.at(x, y, z) =
            static_cast<T>(2.0 * static_cast<double>(m.p.at(x, y, z)) -
                           static_cast<double>(m.p_prev.at(x, y, z)) + dt2 * ptt);
        m.q_prev.at(x, y, z) =
            static_cast<T>(2.0 * static_cast<double>(m.q.at(x, y, z)) -
                           static_cast<double>(m.q_prev.at(x, y, z)) + dt2 * qtt);
      }
  tti_swap(m);
  return make_step_info(m, tti_velocity_max(m));
}

double ricker(double t, double f0, double t0) {
  const double u = std::numbers::pi * f0 * (t - t0);
  const double u2 = u * u;
  return (1.0 - 2.0 * u2) * std::exp(-u2);
}

template <typename T>
void apply_sponge(Grid3<T>& g, Dims3 global_origin, Dims3 global_interior, int width,
                  double alpha) {
  if (width <= 0) return;
  const Dims3 n = g.interior();
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        const std::int64_t gc[3] = {global_origin.x + x, global_origin.y + y,
                                    global_origin.z + z};
        const std::int64_t N[3] = {global_interior.x, global_interior.y,
                                   global_interior.z};
        std::int64_t d = std::numeric_limits<std::int64_t>::max();
        for (int a = 0; a < 3; ++a)
          if (N[a] > 1) d = std::min({d, gc[a], N[a] - 1 - gc[a]});
        if (d < width) {
          const double w = alpha * static_cast<double>(width - d);
          g.at(x, y, z) =
              static_cast<T>(static_cast<double>(g.at(x, y, z)) * std::exp(-w * w));
        }
      }
}

namespace {

template <typename T>
void inject_point(Grid3<T>& g, Dims3 c, double amp) {
  g.at(c.x, c.y, c.z) += static_cast<T>(amp);
}

// Resolves defaulted source cells to the grid center and bounds-checks.
SourceSpec resolve_source(const SourceSpec& in, Dims3 n) {
  SourceSpec s = in;
  if (s.cell.x < 0) s.cell.x = n.x / 2;
  if (s.cell.y < 0) s.cell.y = n.y / 2;
  if (s.cell.z < 0) s.cell.z = n.z / 2;
  if (s.cell.x >= n.x || s.cell.y >= n.y || s.cell.z >= n.z)
    throw ConfigError("source cell lies outside the grid interior");
  if (!(s.f0 > 0.0)) throw ConfigError("source f0 must be positive");
  return s;
}

Dims3 domain_coords(std::int64_t d, Dims3 proc) {
  return Dims3{d % proc.x, (d / proc.x) % proc.y, d / (proc.x * proc.y)};
}

void validate_decomp(Dims3 n, Dims3 proc, int layers, int vl, std::int64_t bz,
                     std::int64_t& slab, Dims3& dn) {
  if (proc.x < 1 || proc.y < 1 || proc.z < 1)
    throw PlanError("process grid extents must be positive");
  const char* axes = "xyz";
  for (int a = 0; a < 3; ++a)
    if (n[a] % proc[a])
      throw PlanError(std::string("interior is not divisible by the process grid on axis ") +
                      axes[a]);
  dn = Dims3{n.x / proc.x, n.y / proc.y, n.z / proc.z};
  require_blockable(dn, vl, bz);
  if (layers < 1) throw PlanError("pipeline layer count must be positive");
  if (dn.z % layers) throw PlanError("pipeline layers must divide the per-domain depth");
  slab = dn.z / layers;
  if (slab % bz)
    throw PlanError("pipeline slab depth must be a multiple of the block depth");
}

// Shared per-step scaffolding for the decomposed drivers: z-slabs of the
// current fields are exchanged one pipeline layer ahead of compute. The
// exchanged range of layer l is [clip_lo, clip_hi) shifted into the halo
// so the union over layers covers every row exactly once; layer 0 and the
// last layer carry the z faces.
struct LayerWindows {
  std::int64_t slab = 0;
  std::int64_t wz = 0;
  std::int64_t nz = 0;
  std::int64_t lo(int l) const {
    return l == 0 ? 0 : static_cast<std::int64_t>(l) * slab + wz;
  }
  std::int64_t hi(int l) const {
    return std::min(nz, (static_cast<std::int64_t>(l) + 1) * slab + wz);
  }
};

}  // namespace

namespace {

template <typename T>
void run_vti_single(VtiModel<T>& m, int steps, const SimOptions& opt,
                    const SourceSpec& src) {
  const Dims3 n = m.sh.interior();
  for (int s = 0; s < steps; ++s) {
    vti_step(m);
    if (opt.source_enabled) {
      const double amp =
          src.amplitude * ricker(static_cast<double>(s + 1) * m.dt, src.f0, src.t0);
      inject_point(m.sh, src.cell, amp);
      inject_point(m.sv, src.cell, amp);
    }
    if (opt.sponge_width > 0) {
      apply_sponge(m.sh, Dims3{0, 0, 0}, n, opt.sponge_width, opt.sponge_alpha);
      apply_sponge(m.sh_prev, Dims3{0, 0, 0}, n, opt.sponge_width, opt.sponge_alpha);
      apply_sponge(m.sv, Dims3{0, 0, 0}, n, opt.sponge_width, opt.sponge_alpha);
      apply_sponge(m.sv_prev, Dims3{0, 0, 0}, n, opt.sponge_width, opt.sponge_alpha);
    }
  }
}

template <typename T>
void run_vti_decomposed(VtiModel<T>& m, int steps, const DecompositionPlan& dec,
                        const SimOptions& opt, const SourceSpec& src) {
  const Precision pr = precision_of<T>();
  const int vl = default_vector_length(pr);
  const std::int64_t bz = default_tile_count(pr);
  const Dims3 n = m.sh.interior();
  const Dims3 proc = dec.proc;
  std::int64_t slab = 0;
  Dims3 dn{0, 0, 0};
  validate_decomp(n, proc, dec.pipeline_layers, vl, bz, slab, dn);
  const int L = dec.pipeline_layers;
  const int r = m.radius;
  const Dims3 h = m.sh.halo();
  const std::int64_t D = proc.volume();

  std::vector<VtiModel<T>> dom(static_cast<std::size_t>(D));
  auto split_member = [&](Grid3<T> VtiModel<T>::* mem) {
    std::vector<Grid3<T>> st;
    split_grid(m.*mem, proc, h, st);
    for (std::int64_t d = 0; d < D; ++d)
      dom[static_cast<std::size_t>(d)].*mem = std::move(st[static_cast<std::size_t>(d)]);
  };
  split_member(&VtiModel<T>::sh);
  split_member(&VtiModel<T>::sh_prev);
  split_member(&VtiModel<T>::sv);
  split_member(&VtiModel<T>::sv_prev);
  split_member(&VtiModel<T>::vp);
  split_member(&VtiModel<T>::eps);
  split_member(&VtiModel<T>::delta);
  for (auto& d : dom) {
    d.hx = m.hx;
    d.hy = m.hy;
    d.hz = m.hz;
    d.dt = m.dt;
    d.radius = m.radius;
  }

  SdmaEngine engine(opt.sdma);
  auto views = [&](Grid3<T> VtiModel<T>::* mem, int base) {
    std::vector<DomainField<T>> v(static_cast<std::size_t>(D));
    for (std::int64_t d = 0; d < D; ++d)
      v[static_cast<std::size_t>(d)] =
          DomainField<T>{&(dom[static_cast<std::size_t>(d)].*mem), domain_coords(d, proc),
                         base + static_cast<int>(d)};
    return v;
  };
  // Materials are exchanged once so every domain sees its neighbors'
  // cells; global-boundary halos stay zero, matching the single-domain
  // grid whose halo is never written.
  {
    auto v = views(&VtiModel<T>::vp, 0);
    halo_exchange(v, proc, h, dec.mode, engine);
  }
  {
    auto v = views(&VtiModel<T>::eps, 0);
    halo_exchange(v, proc, h, dec.mode, engine);
  }
  {
    auto v = views(&VtiModel<T>::delta, 0);
    halo_exchange(v, proc, h, dec.mode, engine);
  }

  auto sh_v = views(&VtiModel<T>::sh, 0);
  auto sv_v = views(&VtiModel<T>::sv, static_cast<int>(D));
  const Dims3 w{r, r, r};
  const LayerWindows win{slab, w.z, dn.z};
  auto exchange_layer = [&](int l) {
    const std::int64_t lo = win.lo(l);
    const std::int64_t hi = std::max(lo, win.hi(l));
    detail::exchange_slab(sh_v, proc, w, dec.mode, engine, lo, hi, l == 0, l == L - 1);
    detail::exchange_slab(sv_v, proc, w, dec.mode, engine, lo, hi, l == 0, l == L - 1);
  };

  std::vector<TileEngine<T>> eng;
  eng.reserve(static_cast<std::size_t>(D));
  for (std::int64_t d = 0; d < D; ++d) eng.emplace_back(vl, static_cast<int>(bz));
  const DerivTables<T> t = make_deriv_tables<T>(m.radius, m.hx, m.hy, m.hz);

  for (int s = 0; s < steps; ++s) {
    std::future<void> pending = std::async(std::launch::async, exchange_layer, 0);
    for (int l = 0; l < L; ++l) {
      pending.get();
      std::future<void> next;
      if (l + 1 < L) next = std::async(std::launch::async, exchange_layer, l + 1);
      for (std::int64_t d = 0; d < D; ++d)
        for (std::int64_t z0 = static_cast<std::int64_t>(l) * slab;
             z0 < static_cast<std::int64_t>(l + 1) * slab; z0 += bz)
          for (std::int64_t y0 = 0; y0 < dn.y; y0 += vl)
            for (std::int64_t x0 = 0; x0 < dn.x; x0 += vl)
              vti_sweep(eng[static_cast<std::size_t>(d)], dom[static_cast<std::size_t>(d)],
                        t, Dims3{x0, y0, z0}, Dims3{vl, vl, bz});
      if (l + 1 < L) pending = std::move(next);
    }
    for (auto& d : dom) vti_swap(d);
    if (opt.source_enabled) {
      const Dims3 oc{src.cell.x / dn.x, src.cell.y / dn.y, src.cell.z / dn.z};
      const std::int64_t od = (oc.z * proc.y + oc.y) * proc.x + oc.x;
      const Dims3 lc{src.cell.x - oc.x * dn.x, src.cell.y - oc.y * dn.y,
                     src.cell.z - oc.z * dn.z};
      const double amp =
          src.amplitude * ricker(static_cast<double>(s + 1) * m.dt, src.f0, src.t0);
      inject_point(dom[static_cast<std::size_t>(od)].sh, lc, amp);
      inject_point(dom[static_cast<std::size_t>(od)].sv, lc, amp);
    }
    if (opt.sponge_width > 0)
      for (std::int64_t d = 0; d < D; ++d) {
        const Dims3 c = domain_coords(d, proc);
        const Dims3 go{c.x * dn.x, c.y * dn.y, c.z * dn.z};
        auto& dm = dom[static_cast<std::size_t>(d)];
        apply_sponge(dm.sh, go, n, opt.sponge_width, opt.sponge_alpha);
        apply_sponge(dm.sh_prev, go, n, opt.sponge_width, opt.sponge_alpha);
        apply_sponge(dm.sv, go, n, opt.sponge_width, opt.sponge_alpha);
        apply_sponge(dm.sv_prev, go, n, opt.sponge_width, opt.sponge_alpha);
      }
  }

  auto gather_member = [&](Grid3<T> VtiModel<T>::* mem) {
    auto v = views(mem, 0);
    gather_grid(v, proc, m.*mem);
  };
  gather_member(&VtiModel<T>::sh);
  gather_member(&VtiModel<T>::sh_prev);
  gather_member(&VtiModel<T>::sv);
  gather_member(&VtiModel<T>::sv_prev);
}

template <typename T>
void run_tti_single(TtiModel<T>& m, int steps, const SimOptions& opt,
                    const SourceSpec& src) {
  const Dims3 n = m.p.interior();
  for (int s = 0; s < steps; ++s) {
    tti_step(m);
    if (opt.source_enabled) {
      const double amp =
          src.amplitude * ricker(static_cast<double>(s + 1) * m.dt, src.f0, src.t0);
      inject_point(m.p, src.cell, amp);
      inject_point(m.q, src.cell, amp);
    }
    if (opt.sponge_width > 0) {
      apply_sponge(m.p, Dims3{0, 0, 0}, n, opt.sponge_width, opt.sponge_alpha);
      apply_sponge(m.p_prev, Dims3{0, 0, 0}, n, opt.sponge_width, opt.sponge_alpha);
      apply_sponge(m.q, Dims3{0, 0, 0}, n, opt.sponge_width, opt.sponge_alpha);
      apply_sponge(m.q_prev, Dims3{0, 0, 0}, n, opt.sponge_width, opt.sponge_alpha);
    }
  }
}

template <typename T>
void run_tti_decomposed(TtiModel<T>& m, int steps, const DecompositionPlan& dec,
                        const SimOptions& opt, const SourceSpec& src) {
  const Precision pr = precision_of<T>();
  const int vl = default_vector_length(pr);
  const std::int64_t bz = default_tile_count(pr);
  const Dims3 n = m.p.interior();
  const Dims3 proc = dec.proc;
  std::int64_t slab = 0;
  Dims3 dn{0, 0, 0};
  validate_decomp(n, proc, dec.pipeline_layers, vl, bz, slab, dn);
  const int L = dec.pipeline_layers;
  const int r = m.radius;
  const Dims3 h = m.p.halo();
  const std::int64_t D = proc.volume();

  std::vector<TtiModel<T>> dom(static_cast<std::size_t>(D));
  auto split_member = [&](Grid3<T> TtiModel<T>::* mem) {
    std::vector<Grid3<T>> st;
    split_grid(m.*mem, proc, h, st);
    for (std::int64_t d = 0; d < D; ++d)
      dom[static_cast<std::size_t>(d)].*mem = std::move(st[static_cast<std::size_t>(d)]);
  };
  split_member(&TtiModel<T>::p);
  split_member(&TtiModel<T>::p_prev);
  split_member(&TtiModel<T>::q);
  split_member(&TtiModel<T>::q_prev);
  split_member(&TtiModel<T>::vpx);
  split_member(&TtiModel<T>::vpz);
  split_member(&TtiModel<T>::vpn);
  split_member(&TtiModel<T>::vsz);
  split_member(&TtiModel<T>::alpha);
  split_member(&TtiModel<T>::theta);
  split_member(&TtiModel<T>::phi);
  for (auto& d : dom) {
    d.hx = m.hx;
    d.hy = m.hy;
    d.hz = m.hz;
    d.dt = m.dt;
    d.radius = m.radius;
  }

  SdmaEngine engine(opt.sdma);
  auto views = [&](Grid3<T> TtiModel<T>::* mem, int base) {
    std::vector<DomainField<T>> v(static_cast<std::size_t>(D));
    for (std::int64_t d = 0; d < D; ++d)
      v[static_cast<std::size_t>(d)] =
          DomainField<T>{&(dom[static_cast<std::size_t>(d)].*mem), domain_coords(d, proc),
                         base + static_cast<int>(d)};
    return v;
  };
  for (auto mem : {&TtiModel<T>::vpx, &TtiModel<T>::vpz, &TtiModel<T>::vpn,
                   &TtiModel<T>::vsz, &TtiModel<T>::alpha, &TtiModel<T>::theta,
                   &TtiModel<T>::phi}) {
    auto v = views(mem, 0);
    halo_exchange(v, proc, h, dec.mode, engine);
  }

  std::vector<TtiAux<T>> aux;
  aux.reserve(static_cast<std::size_t>(D));
  for (std::int64_t d = 0; d < D; ++d)
    aux.push_back(TtiAux<T>{Grid3<T>(dn, h), Grid3<T>(dn, h)});

  auto p_v = views(&TtiModel<T>::p, 0);
  auto q_v = views(&TtiModel<T>::q, static_cast<int>(D));
  const Dims3 w{r, r, r};
  const LayerWindows win{slab, w.z, dn.z};
  // Each layer's exchange also refreshes the auxiliary fields over the
  // rows it just made current (plus the z-face halo rows at the ends);
  // compute on layer l only reads aux rows covered by layers <= l, so the
  // refresh of layer l+1 never races it.
  auto exchange_layer = [&](int l) {
    const std::int64_t lo = win.lo(l);
    const std::int64_t hi = std::max(lo, win.hi(l));
    detail::exchange_slab(p_v, proc, w, dec.mode, engine, lo, hi, l == 0, l == L - 1);
    detail::exchange_slab(q_v, proc, w, dec.mode, engine, lo, hi, l == 0, l == L - 1);
    std::int64_t alo = lo, ahi = hi;
    if (l == 0) alo = -w.z;
    if (l == L - 1) ahi = dn.z + w.z;
    for (std::int64_t d = 0; d < D; ++d)
      tti_update_aux(dom[static_cast<std::size_t>(d)], aux[static_cast<std::size_t>(d)],
                     alo, ahi);
  };

  std::vector<TileEngine<T>> eng;
  eng.reserve(static_cast<std::size_t>(D));
  for (std::int64_t d = 0; d < D; ++d) eng.emplace_back(vl, static_cast<int>(bz));
  std::vector<TtiScratch<T>> scratch(static_cast<std::size_t>(D));
  const DerivTables<T> t = make_deriv_tables<T>(m.radius, m.hx, m.hy, m.hz);

  for (int s = 0; s < steps; ++s) {
    std::future<void> pending = std::async(std::launch::async, exchange_layer, 0);
    for (int l = 0; l < L; ++l) {
      pending.get();
      std::future<void> next;
      if (l + 1 < L) next = std::async(std::launch::async, exchange_layer, l + 1);
      for (std::int64_t d = 0; d < D; ++d)
        for (std::int64_t z0 = static_cast<std::int64_t>(l) * slab;
             z0 < static_cast<std::int64_t>(l + 1) * slab; z0 += bz)
          for (std::int64_t y0 = 0; y0 < dn.y; y0 += vl)
            for (std::int64_t x0 = 0; x0 < dn.x; x0 += vl)
              tti_sweep(eng[static_cast<std::size_t>(d)], dom[static_cast<std::size_t>(d)],
                        aux[static_cast<std::size_t>(d)], t, Dims3{x0, y0, z0},
                        Dims3{vl, vl, bz}, scratch[static_cast<std::size_t>(d)]);
      if (l + 1 < L) pending = std::move(next);
    }
    for (auto& d : dom) tti_swap(d);
    if (opt.source_enabled) {
      const Dims3 oc{src.cell.x / dn.x, src.cell.y / dn.y, src.cell.z / dn.z};
      const std::int64_t od = (oc.z * proc.y + oc.y) * proc.x + oc.x;
      const Dims3 lc{src.cell.x - oc.x * dn.x, src.cell.y - oc.y * dn.y,
                     src.cell.z - oc.z * dn.z};
      const double amp =
          src.amplitude * ricker(static_cast<double>(s + 1) * m.dt, src.f0, src.t0);
      inject_point(dom[static_cast<std::size_t>(od)].p, lc, amp);
      inject_point(dom[static_cast<std::size_t>(od)].q, lc, amp);
    }
    if (opt.sponge_width > 0)
      for (std::int64_t d = 0; d < D; ++d) {
        const Dims3 c = domain_coords(d, proc);
        const Dims3 go{c.x * dn.x, c.y * dn.y, c.z * dn.z};
        auto& dm = dom[static_cast<std::size_t>(d)];
        apply_sponge(dm.p, go, n, opt.sponge_width, opt.sponge_alpha);
        apply_sponge(dm.p_prev, go, n, opt.sponge_width, opt.sponge_alpha);
        apply_sponge(dm.q, go, n, opt.sponge_width, opt.sponge_alpha);
        apply_sponge(dm.q_prev, go, n, opt.sponge_width, opt.sponge_alpha);
      }
  }

  auto gather_member = [&](Grid3<T> TtiModel<T>::* mem) {
    auto v = views(mem, 0);
    gather_grid(v, proc, m.*mem);
  };
  gather_member(&TtiModel<T>::p);
  gather_member(&TtiModel<T>::p_prev);
  gather_member(&TtiModel<T>::q);
  gather_member(&TtiModel<T>::q_prev);
}

template <typename T, typename Model, typename Single, typename Decomposed>
RtmRunReport run_common(Model& m, const Grid3<T>& field_a, const Grid3<T>& field_b,
                        double vmax, int steps, const DecompositionPlan& decomp,
                        const SimOptions& opt, Single single, Decomposed decomposed) {
  if (steps < 0) throw ConfigError("step count must be non-negative");
  if (decomp.proc.x < 1 || decomp.proc.y < 1 || decomp.proc.z < 1)
    throw PlanError("process grid extents must be positive");
  const Dims3 n = field_a.interior();
  SourceSpec src = opt.source;
  if (opt.source_enabled) src = resolve_source(src, n);

  RtmRunReport rep;
  rep.steps = steps;
  rep.dt = m.dt;
  rep.dt_limit = cfl_dt_limit(m.radius, vmax, m.hx, m.hy, m.hz);
  rep.dt_within_limit = m.dt <= rep.dt_limit;

  const auto tick = std::chrono::steady_clock::now();
  if (steps > 0) {
    if (decomp.proc.volume() == 1)
      single(src);
    else
      decomposed(src);
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - tick).count();
  rep.emulated_wall_seconds = wall;
  const double pts = static_cast<double>(steps) * static_cast<double>(n.volume());
  rep.emulated_points_per_second = (steps > 0 && wall > 0.0) ? pts / wall : 0.0;
  rep.modeled_bandwidth_utilization = bandwidth_utilization(
      rep.emulated_points_per_second / 1e9, precision_of<T>(), MachineModel{});
  rep.max_abs_field = std::max(max_abs_interior(field_a), max_abs_interior(field_b));
  return rep;
}

}  // namespace

template <typename T>
RtmRunReport run_simulation(VtiModel<T>& m, int steps, const DecompositionPlan& decomp,
                            const SimOptions& opt) {
  validate_vti(m);
  return run_common<T>(
      m, m.sh, m.sv, vti_velocity_max(m), steps, decomp, opt,
      [&](const SourceSpec& src) { run_vti_single(m, steps, opt, src); },
      [&](const SourceSpec& src) { run_vti_decomposed(m, steps, decomp, opt, src); });
}

template <typename T>
RtmRunReport run_simulation(TtiModel<T>& m, int steps, const DecompositionPlan& decomp,
                            const SimOptions& opt) {
  validate_tti(m);
  return run_common<T>(
      m, m.p, m.q, tti_velocity_max(m), steps, decomp, opt,
      [&](const SourceSpec& src) { run_tti_single(m, steps, opt, src); },
      [&](const SourceSpec& src) { run_tti_decomposed(m, steps, decomp, opt, src); });
}

std::string report_to_json(const RtmRunReport& r) {
  nlohmann::json j;
  j["steps"] = r.steps;
  j["dt"] = r.dt;
  j["dt_limit"] = r.dt_limit;
  j["dt_within_limit"] = r.dt_within_limit;
  j["emulated_wall_seconds"] = r.emulated_wall_seconds;
  j["emulated_points_per_second"] = r.emulated_points_per_second;
  j["modeled_bandwidth_utilization"] = r.modeled_bandwidth_utilization;
  j["max_abs_field"] = r.max_abs_field;
  return j.dump(2);
}

namespace {

Dims3 dims_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError(std::string(what) + " must be a 3-element array");
  Dims3 d;
  for (int a = 0; a < 3; ++a) {
    if (!j[static_cast<std::size_t>(a)].is_number_integer())
      throw ConfigError(std::string(what) + " entries must be integers");
    d[a] = j[static_cast<std::size_t>(a)].get<std::int64_t>();
  }
  return d;
}

const char* const kMaterialKeys[] = {"vp",  "eps", "delta", "vpx",   "vpz",
                                     "vpn", "vsz", "alpha", "theta", "phi"};

bool known_material(const std::string& k) {
  for (const char* m : kMaterialKeys)
    if (k == m) return true;
  return false;
}

}  // namespace

RtmConfig rtm_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid rtm config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("rtm config must be a JSON object");
  RtmConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k == "medium") {
        c.medium = it->get<std::string>();
      } else if (k == "precision") {
        const std::string s = it->get<std::string>();
        if (s == "f32")
          c.precision = Precision::F32;
        else if (s == "f64")
          c.precision = Precision::F64;
        else
          throw ConfigError("precision must be \"f32\" or \"f64\"");
      } else if (k == "grid") {
        c.grid = dims_from_json(*it, "grid");
      } else if (k == "radius") {
        c.radius = it->get<int>();
      } else if (k == "spacing") {
        const auto a = it->get<std::vector<double>>();
        if (a.size() != 3) throw ConfigError("spacing must be a 3-element array");
        c.hx = a[0];
        c.hy = a[1];
        c.hz = a[2];
      } else if (k == "dt") {
        c.dt = it->get<double>();
      } else if (k == "steps") {
        c.steps = it->get<int>();
      } else if (k == "materials") {
        if (!it->is_object()) throw ConfigError("materials must be an object");
        for (auto mt = it->begin(); mt != it->end(); ++mt) {
          const std::string& mk = mt.key();
          const double v = mt->get<double>();
          if (mk == "vp")
            c.vp = v;
          else if (mk == "eps")
            c.eps = v;
          else if (mk == "delta")
            c.delta = v;
          else if (mk == "vpx")
            c.vpx = v;
          else if (mk == "vpz")
            c.vpz = v;
          else if (mk == "vpn")
            c.vpn = v;
          else if (mk == "vsz")
            c.vsz = v;
          else if (mk == "alpha")
            c.alpha = v;
          else if (mk == "theta")
            c.theta = v;
          else if (mk == "phi")
            c.phi = v;
          else
            throw ConfigError("unknown material '" + mk + "'");
        }
      } else if (k == "fields") {
        if (!it->is_object()) throw ConfigError("fields must be an object");
        for (auto ft = it->begin(); ft != it->end(); ++ft) {
          if (!known_material(ft.key()))
            throw ConfigError("unknown field '" + ft.key() + "'");
          c.field_files[ft.key()] = ft->get<std::string>();
        }
      } else if (k == "source") {
        if (!it->is_object()) throw ConfigError("source must be an object");
        c.source_enabled = true;
        for (auto st = it->begin(); st != it->end(); ++st) {
          const std::string& sk = st.key();
          if (sk == "enabled")
            c.source_enabled = st->get<bool>();
          else if (sk == "cell")
            c.source.cell = dims_from_json(*st, "source cell");
          else if (sk == "f0")
            c.source.f0 = st->get<double>();
          else if (sk == "t0")
            c.source.t0 = st->get<double>();
          else if (sk == "amplitude")
            c.source.amplitude = st->get<double>();
          else
            throw ConfigError("unknown source key '" + sk + "'");
        }
      } else if (k == "sponge") {
        if (!it->is_object()) throw ConfigError("sponge must be an object");
        for (auto st = it->begin(); st != it->end(); ++st) {
          const std::string& sk = st.key();
          if (sk == "width")
            c.sponge_width = st->get<int>();
          else if (sk == "alpha")
            c.sponge_alpha = st->get<double>();
          else
            throw ConfigError("unknown sponge key '" + sk + "'");
        }
      } else if (k == "decomp") {
        c.decomp = decomp_from_json(it->dump());
      } else {
        throw ConfigError("unknown rtm config key '" + k + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("rtm config type error: ") + e.what());
  }
  if (c.medium != "vti" && c.medium != "tti")
    throw ConfigError("medium must be \"vti\" or \"tti\"");
  if (c.grid.x < 1 || c.grid.y < 1 || c.grid.z < 1)
    throw ConfigError("grid extents must be positive");
  if (c.radius < 1) throw ConfigError("radius must be positive");
  if (c.steps < 0) throw ConfigError("steps must be non-negative");
  if (!(c.hx > 0.0) || !(c.hy > 0.0) || !(c.hz > 0.0))
    throw ConfigError("spacings must be positive");
  if (c.sponge_width < 0) throw ConfigError("sponge width must be non-negative");
  return c;
}

std::string rtm_config_to_json(const RtmConfig& c) {
  nlohmann::json j;
  j["medium"] = c.medium;
  j["precision"] = c.precision == Precision::F32 ? "f32" : "f64";
  j["grid"] = {c.grid.x, c.grid.y, c.grid.z};
  j["radius"] = c.radius;
  j["spacing"] = {c.hx, c.hy, c.hz};
  j["dt"] = c.dt;
  j["steps"] = c.steps;
  nlohmann::json mats;
  mats["vp"] = c.vp;
  mats["eps"] = c.eps;
  mats["delta"] = c.delta;
  mats["vpx"] = c.vpx;
  mats["vpz"] = c.vpz;
  mats["vpn"] = c.vpn;
  mats["vsz"] = c.vsz;
  mats["alpha"] = c.alpha;
  mats["theta"] = c.theta;
  mats["phi"] = c.phi;
  j["materials"] = mats;
  if (!c.field_files.empty()) {
    nlohmann::json f;
    for (const auto& [k, v] : c.field_files) f[k] = v;
    j["fields"] = f;
  }
  nlohmann::json src;
  src["enabled"] = c.source_enabled;
  src["cell"] = {c.source.cell.x, c.source.cell.y, c.source.cell.z};
  src["f0"] = c.source.f0;
  src["t0"] = c.source.t0;
  src["amplitude"] = c.source.amplitude;
  j["source"] = src;
  nlohmann::json sp;
  sp["width"] = c.sponge_width;
  sp["alpha"] = c.sponge_alpha;
  j["sponge"] = sp;
  j["decomp"] = nlohmann::json::parse(decomp_to_json(c.decomp));
  return j.dump(2);
}

namespace {

template <typename T>
void fill_constant(Grid3<T>& g, double v) {
  const Dims3 n = g.interior();
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) g.at(x, y, z) = static_cast<T>(v);
}

template <typename T>
void load_override(Grid3<T>& g, const std::string& path, Dims3 grid) {
  Grid3<T> f = read_grid_as<T>(path);
  if (!(f.interior() == grid))
    throw ConfigError("field file '" + path + "' does not match the configured grid");
  const Dims3 n = grid;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) g.at(x, y, z) = f.at(x, y, z);
}

void validate_build_config(const RtmConfig& c) {
  if (c.grid.x < 1 || c.grid.y < 1 || c.grid.z < 1)
    throw ConfigError("grid extents must be positive");
  if (c.radius < 1) throw ConfigError("radius must be positive");
  if (!(c.hx > 0.0) || !(c.hy > 0.0) || !(c.hz > 0.0))
    throw ConfigError("spacings must be positive");
}

}  // namespace

template <typename T>
VtiModel<T> build_vti_model(const RtmConfig& c) {
  if (c.medium != "vti") throw ConfigError("config medium is not \"vti\"");
  validate_build_config(c);
  VtiModel<T> m = make_vti_model<T>(c.grid, c.radius, c.hx, c.hy, c.hz, 1.0);
  fill_constant(m.vp, c.vp);
  fill_constant(m.eps, c.eps);
  fill_constant(m.delta, c.delta);
  for (const auto& [name, path] : c.field_files) {
    if (name == "vp")
      load_override(m.vp, path, c.grid);
    else if (name == "eps")
      load_override(m.eps, path, c.grid);
    else if (name == "delta")
      load_override(m.delta, path, c.grid);
    else
      throw ConfigError("field '" + name + "' does not belong to a vti medium");
  }
  const Dims3 n = c.grid;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        if (!(static_cast<double>(m.vp.at(x, y, z)) > 0.0))
          throw ConfigError("vp must be positive everywhere");
        if (1.0 + 2.0 * static_cast<double>(m.delta.at(x, y, z)) < 0.0)
          throw ConfigError("1 + 2*delta must be non-negative everywhere");
      }
  m.dt = c.dt;
  if (!(m.dt > 0.0))
    m.dt = 0.8 * cfl_dt_limit(c.radius, vti_velocity_max(m), c.hx, c.hy, c.hz);
  if (!(m.dt > 0.0) || !std::isfinite(m.dt))
    throw ConfigError("could not derive a positive timestep");
  return m;
}

template <typename T>
TtiModel<T> build_tti_model(const RtmConfig& c) {
  if (c.medium != "tti") throw ConfigError("config medium is not \"tti\"");
  validate_build_config(c);
  TtiModel<T> m = make_tti_model<T>(c.grid, c.radius, c.hx, c.hy, c.hz, 1.0);
  fill_constant(m.vpx, c.vpx);
  fill_constant(m.vpz, c.vpz);
  fill_constant(m.vpn, c.vpn);
  fill_constant(m.vsz, c.vsz);
  fill_constant(m.alpha, c.alpha);
  fill_constant(m.theta, c.theta);
  fill_constant(m.phi, c.phi);
  for (const auto& [name, path] : c.field_files) {
    if (name == "vpx")
      load_override(m.vpx, path, c.grid);
    else if (name == "vpz")
      load_override(m.vpz, path, c.grid);
    else if (name == "vpn")
      load_override(m.vpn, path, c.grid);
    else if (name == "vsz")
      load_override(m.vsz, path, c.grid);
    else if (name == "alpha")
      load_override(m.alpha, path, c.grid);
    else if (name == "theta")
      load_override(m.theta, path, c.grid);
    else if (name == "phi")
      load_override(m.phi, path, c.grid);
    else
      throw ConfigError("field '" + name + "' does not belong to a tti medium");
  }
  const Dims3 n = c.grid;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x)
        if (static_cast<double>(m.alpha.at(x, y, z)) == 0.0)
          throw ConfigError("alpha must be nonzero everywhere");
  m.dt = c.dt;
  if (!(m.dt > 0.0))
    m.dt = 0.8 * cfl_dt_limit(c.radius, tti_velocity_max(m), c.hx, c.hy, c.hz);
  if (!(m.dt > 0.0) || !std::isfinite(m.dt))
    throw ConfigError("could not derive a positive timestep");
  return m;
}

#define MMSTENCIL_RTM_INST(T)                                                                \
  template DerivTables<T> make_deriv_tables<T>(int, double, double, double);                 \
  template void derivatives_block<T>(TileEngine<T>&, const Grid3<T>&, Dims3, Dims3,         \
                                     const DerivTables<T>&, DerivativeSet<T>&);             \
  template VtiModel<T> make_vti_model<T>(Dims3, int, double, double, double, double);       \
  template TtiModel<T> make_tti_model<T>(Dims3, int, double, double, double, double);       \
  template double vti_velocity_max<T>(const VtiModel<T>&);                                  \
  template double tti_velocity_max<T>(const TtiModel<T>&);                                  \
  template void vti_sweep<T>(TileEngine<T>&, VtiModel<T>&, const DerivTables<T>&, Dims3,    \
                             Dims3);                                                        \
  template void vti_swap<T>(VtiModel<T>&);                                                  \
  template StepInfo vti_step<T>(VtiModel<T>&);                                              \
  template StepInfo vti_step_reference<T>(VtiModel<T>&);                                    \
  template void tti_update_aux<T>(const TtiModel<T>&, TtiAux<T>&, std::int64_t,             \
                                  std::int64_t);                                            \
  template void tti_sweep<T>(TileEngine<T>&, TtiModel<T>&, const TtiAux<T>&,                \
                             const DerivTables<T>&, Dims3, Dims3, TtiScratch<T>&);          \
  template void tti_swap<T>(TtiModel<T>&);                                                  \
  template StepInfo tti_step<T>(TtiModel<T>&);                                              \
  template StepInfo tti_step_reference<T>(TtiModel<T>&);                                    \
  template void apply_sponge<T>(Grid3<T>&, Dims3, Dims3, int, double);                      \
  template RtmRunReport run_simulation<T>(VtiModel<T>&, int, const DecompositionPlan&,      \
                                          const SimOptions&);                               \
  template RtmRunReport run_simulation<T>(TtiModel<T>&, int, const DecompositionPlan&,      \
                                          const SimOptions&);                               \
  template VtiModel<T> build_vti_model<T>(const RtmConfig&);                                \
  template TtiModel<T> build_tti_model<T>(const RtmConfig&);

MMSTENCIL_RTM_INST(float)
MMSTENCIL_RTM_INST(double)
#undef MMSTENCIL_RTM_INST

}  // namespace mmstencil
