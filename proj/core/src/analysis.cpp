#include "mmstencil/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include <nlohmann/json.hpp>

namespace mmstencil {

namespace {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

Rational rational_from_double(double d, const char* what) {
  if (!std::isfinite(d)) throw std::invalid_argument(std::string(what) + " must be finite");
  int exp = 0;
  const double frac = std::frexp(d, &exp);
  const auto mant = static_cast<std::int64_t>(std::ldexp(frac, 53));
  // d == mant * 2^(exp - 53) exactly
  Rational r(mant);
  const int shift = exp - 53;
  if (shift >= 0) {
    r *= Rational(BigInt(1) << shift);
  } else {
    r /= Rational(BigInt(1) << -shift);
  }
  return r;
}

std::int64_t to_int64_checked(const BigInt& v, const char* what) {
  if (v > BigInt(std::numeric_limits<std::int64_t>::max()) ||
      v < BigInt(std::numeric_limits<std::int64_t>::min()))
    throw std::overflow_error(std::string(what) + " exceeds 64-bit range");
  return static_cast<std::int64_t>(v);
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

void check_machine(const MachineModel& m) {
  if (!(m.cpi_simd > 0) || !std::isfinite(m.cpi_simd))
    throw std::invalid_argument("cpi_simd must be positive");
  if (!(m.cpi_matrix > 0) || !std::isfinite(m.cpi_matrix))
    throw std::invalid_argument("cpi_matrix must be positive");
  if (m.vector_length < 1) throw std::invalid_argument("vector_length must be positive");
  if (!(m.frequency_ratio > 0) || !std::isfinite(m.frequency_ratio))
    throw std::invalid_argument("frequency_ratio must be positive");
}

}  // namespace

MachineModel machine_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("machine model: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("machine model: top level must be an object");
  MachineModel m;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "cpi_simd") m.cpi_simd = value.get<double>();
      else if (key == "cpi_matrix") m.cpi_matrix = value.get<double>();
      else if (key == "vector_length") m.vector_length = value.get<int>();
      else if (key == "frequency_ratio") m.frequency_ratio = value.get<double>();
      else if (key == "simd_peak_flops") m.simd_peak_flops = value.get<double>();
      else if (key == "peak_bandwidth") m.peak_bandwidth = value.get<double>();
      else if (key == "llc_bytes") m.llc_bytes = value.get<std::int64_t>();
      else if (key == "cacheline_bytes") m.cacheline_bytes = value.get<int>();
      else if (key == "sdma_channels") m.sdma_channels = value.get<int>();
      else throw ConfigError("machine model: unknown key \"" + key + "\"");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("machine model key \"" + key + "\": " + e.what());
    }
  }
  try {
    check_machine(m);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("machine model: ") + e.what());
  }
  return m;
}

std::string machine_to_json(const MachineModel& m) {
  nlohmann::json j{
      {"cpi_simd", m.cpi_simd},
      {"cpi_matrix", m.cpi_matrix},
      {"vector_length", m.vector_length},
      {"frequency_ratio", m.frequency_ratio},
      {"simd_peak_flops", m.simd_peak_flops},
      {"peak_bandwidth", m.peak_bandwidth},
      {"llc_bytes", m.llc_bytes},
      {"cacheline_bytes", m.cacheline_bytes},
      {"sdma_channels", m.sdma_channels},
  };
  return j.dump(2);
}

MachineModel load_machine(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open machine model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return machine_from_json(ss.str());
}

ExactRatio matrix_speedup(int radius, const MachineModel& m) {
  if (radius < 0) throw std::invalid_argument("radius must be nonnegative");
  check_machine(m);
  // One matrix outer product retires V_L*(2r+1) useful multiply-adds per
  // (V_L+2r) input elements streamed; the SIMD path retires V_L per issue.
  Rational r = Rational(m.vector_length) * (2 * radius + 1) *
               rational_from_double(m.cpi_simd, "cpi_simd") *
               rational_from_double(m.frequency_ratio, "frequency_ratio");
  r /= Rational(m.vector_length + 2 * radius) *
       rational_from_double(m.cpi_matrix, "cpi_matrix");
  ExactRatio out;
  out.num = to_int64_checked(numerator(r), "speedup numerator");
  out.den = to_int64_checked(denominator(r), "speedup denominator");
  return out;
}

double bandwidth_utilization(double gstencils_per_sec, Precision p, const MachineModel& m) {
  if (!(gstencils_per_sec >= 0) || !std::isfinite(gstencils_per_sec))
    throw std::invalid_argument("stencil rate must be nonnegative");
  if (!(m.peak_bandwidth > 0)) throw std::invalid_argument("peak_bandwidth must be positive");
  const double bytes_per_stencil = 2.0 * static_cast<double>(element_bytes(p));
  return gstencils_per_sec * 1e9 * bytes_per_stencil / m.peak_bandwidth;
}

std::int64_t count_streams(const StencilSpec& spec, Dims3 block_origin, Dims3 block_extent,
                           Dims3 interior, Dims3 halo, Layout layout, Dims3 brick) {
  if (block_extent.x < 1 || block_extent.y < 1 || block_extent.z < 1)
    throw ShapeError("block extent must be positive");
  const Dims3 padded{interior.x + 2 * halo.x, interior.y + 2 * halo.y,
                     interior.z + 2 * halo.z};
  if (layout == Layout::Brick) {
    for (int a = 0; a < 3; ++a) {
      if (brick[a] < 1 || padded[a] % brick[a] != 0)
        throw LayoutError(std::string("padded ") + axis_name(a) +
                          " extent not divisible by brick size");
    }
  }

  // Exact input footprint: union of (point + stencil offset) over the block.
  std::vector<std::int64_t> ids;
  ids.reserve(static_cast<std::size_t>(block_extent.volume()) * spec.entries.size());
  const std::int64_t bricks_x = layout == Layout::Brick ? padded.x / brick.x : 0;
  const std::int64_t bricks_y = layout == Layout::Brick ? padded.y / brick.y : 0;
  for (const auto& e : spec.entries) {
    for (std::int64_t z = 0; z < block_extent.z; ++z) {
      const std::int64_t pz = block_origin.z + z + e.offset.z + halo.z;
      if (pz < 0 || pz >= padded.z) throw HaloError("footprint exceeds padded z extent");
      for (std::int64_t y = 0; y < block_extent.y; ++y) {
        const std::int64_t py = block_origin.y + y + e.offset.y + halo.y;
        if (py < 0 || py >= padded.y) throw HaloError("footprint exceeds padded y extent");
        for (std::int64_t x = 0; x < block_extent.x; ++x) {
          const std::int64_t px = block_origin.x + x + e.offset.x + halo.x;
          if (px < 0 || px >= padded.x) throw HaloError("footprint exceeds padded x extent");
          if (layout == Layout::Flat) {
            ids.push_back((pz * padded.y + py) * padded.x + px);
          } else {
            ids.push_back((pz / brick.z * bricks_y + py / brick.y) * bricks_x + px / brick.x);
          }
        }
      }
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::int64_t streams = 0;
  std::int64_t prev = std::numeric_limits<std::int64_t>::min();
  for (std::int64_t id : ids) {
    if (id != prev + 1) ++streams;
    prev = id;
  }
  return streams;
}

double reuse_ratio_classic_at(Dims3 b, std::int64_t tile_x, std::int64_t tile_y) {
  if (tile_x < 1 || tile_y < 1) throw std::invalid_argument("tile extents must be positive");
  return static_cast<double>(tile_x) * static_cast<double>(tile_y) /
         (static_cast<double>(tile_x + 2 * b.x) * static_cast<double>(tile_y + 2 * b.y));
}

double reuse_ratio_snoop_at(Dims3 b, std::int64_t tile_x) {
  if (tile_x < 1) throw std::invalid_argument("tile extents must be positive");
  return static_cast<double>(tile_x) / static_cast<double>(tile_x + 2 * b.x);
}

namespace {

// Enumerates power-of-two tiles whose slice of depth (vz + 2Bz) fits the
// cache; calls fn(tx, ty) for each feasible pair.
template <typename Fn>
bool for_each_feasible_tile(Dims3 b, std::int64_t vz, Precision p, const MachineModel& m,
                            Fn&& fn) {
  if (b.x < 0 || b.y < 0 || b.z < 0) throw std::invalid_argument("halo widths must be nonnegative");
  if (vz < 1) throw std::invalid_argument("slice depth must be positive");
  if (m.llc_bytes < 1) throw std::invalid_argument("llc_bytes must be positive");
  const std::int64_t eb = static_cast<std::int64_t>(element_bytes(p));
  const std::int64_t budget = m.llc_bytes / (eb * (vz + 2 * b.z));
  bool any = false;
  for (std::int64_t tx = 1; tx + 2 * b.x <= budget; tx *= 2) {
    const std::int64_t rows = budget / (tx + 2 * b.x);
    for (std::int64_t ty = 1; ty + 2 * b.y <= rows; ty *= 2) {
      any = true;
      fn(tx, ty);
    }
  }
  return any;
}

}  // namespace

ReusePoint reuse_ratio_classic(Dims3 b, std::int64_t vz, Precision p, const MachineModel& m) {
  ReusePoint best;
  const bool any = for_each_feasible_tile(b, vz, p, m, [&](std::int64_t tx, std::int64_t ty) {
    const double r = reuse_ratio_classic_at(b, tx, ty);
    // Strict improvement, or an equal ratio at wider tile_x.
    if (r > best.ratio || (r == best.ratio && tx > best.tile_x)) best = {tx, ty, r};
  });
  if (!any)
    throw InfeasibleError("no power-of-two tile slice fits the last-level cache budget");
  return best;
}

ReusePoint reuse_ratio_snoop(Dims3 b, std::int64_t vz, Precision p, const MachineModel& m) {
  ReusePoint best;
  const bool any = for_each_feasible_tile(b, vz, p, m, [&](std::int64_t tx, std::int64_t ty) {
    const double r = reuse_ratio_snoop_at(b, tx);
    if (r > best.ratio || (r == best.ratio && tx > best.tile_x)) best = {tx, ty, r};
  });
  if (!any)
    throw InfeasibleError("no power-of-two tile slice fits the last-level cache budget");
  return best;
}

TrafficReport traffic_model(const StencilSpec& spec, Dims3 tile, Dims3 b, Precision p,
                            const MachineModel& m, const TrafficOptions& opt) {
  (void)spec;  // footprint shape is captured by the halo widths
  if (tile.x < 1 || tile.y < 1 || tile.z < 1)
    throw ShapeError("tile extents must be positive");
  if (b.x < 0 || b.y < 0 || b.z < 0) throw ShapeError("halo widths must be nonnegative");
  if (m.cacheline_bytes < 1) throw std::invalid_argument("cacheline_bytes must be positive");
  const std::int64_t eb = static_cast<std::int64_t>(element_bytes(p));
  const std::int64_t cl = m.cacheline_bytes;
  const std::int64_t px = tile.x + 2 * b.x;
  const std::int64_t py = tile.y + 2 * b.y;
  const std::int64_t pz = tile.z + 2 * b.z;
  const std::int64_t padded_vol = px * py * pz;
  const std::int64_t interior_vol = tile.volume();

  // Halo regions redirected to peer caches under snooping: the y-halo rows
  // (full padded x and z) and the z-halo planes restricted to interior y,
  // so the two regions partition the y/z halo union.
  std::int64_t redirected = 0;
  if (opt.snoop) {
    const std::int64_t y_side = px * b.y * pz;
    const std::int64_t z_side = px * tile.y * b.z;
    if (opt.y_lo) redirected += y_side;
    if (opt.y_hi) redirected += y_side;
    if (opt.z_lo) redirected += z_side;
    if (opt.z_hi) redirected += z_side;
  }

  TrafficReport r;
  const std::int64_t total_read_lines = ceil_div(padded_vol * eb, cl);
  r.neighbor_cache_lines = ceil_div(redirected * eb, cl);
  r.mainmem_lines_read = total_read_lines - r.neighbor_cache_lines;
  r.mainmem_lines_written = ceil_div(interior_vol * eb, cl);
  if (!opt.write_alloc_avoided) r.mainmem_lines_read += r.mainmem_lines_written;
  r.redundant_line_fraction =
      static_cast<double>(padded_vol - interior_vol) / static_cast<double>(padded_vol);
  return r;
}

const char* to_string(RooflineClass c) {
  switch (c) {
    case RooflineClass::MemoryBound: return "memory-bound";
    case RooflineClass::ComputeBound: return "compute-bound";
    case RooflineClass::Both: return "both";
  }
  return "unknown";
}

RooflineResult roofline_classify(const StencilSpec& spec, Dims3 tile, Dims3 b, Precision p,
                                 const MachineModel& m) {
  if (!(m.simd_peak_flops > 0) || !(m.peak_bandwidth > 0))
    throw std::invalid_argument("peak rates must be positive");
  TrafficOptions opt;
  opt.snoop = false;
  opt.write_alloc_avoided = false;
  const TrafficReport t = traffic_model(spec, tile, b, p, m, opt);
  const double bytes = static_cast<double>(t.total_mainmem_lines()) * m.cacheline_bytes;
  const double flops = 2.0 * static_cast<double>(spec.point_count()) *
                       static_cast<double>(tile.volume());
  RooflineResult out;
  out.arithmetic_intensity = flops / bytes;
  out.machine_balance = m.simd_peak_flops / m.peak_bandwidth;
  if (out.arithmetic_intensity < 0.75 * out.machine_balance)
    out.cls = RooflineClass::MemoryBound;
  else if (out.arithmetic_intensity > 1.25 * out.machine_balance)
    out.cls = RooflineClass::ComputeBound;
  else
    out.cls = RooflineClass::Both;
  return out;
}

double wave_grid_points(double dim_x, double dim_y, double dim_z, double f0, double vmin,
                        double points_per_wavelength) {
  if (!(dim_x > 0) || !(dim_y > 0) || !(dim_z > 0))
    throw std::invalid_argument("domain dimensions must be positive");
  if (!(f0 > 0)) throw std::invalid_argument("peak frequency must be positive");
  if (!(vmin > 0)) throw std::invalid_argument("minimum velocity must be positive");
  if (!(points_per_wavelength > 0))
    throw std::invalid_argument("points per wavelength must be positive");
  const double h = vmin / (f0 * points_per_wavelength);  // spacing for G points per wavelength
  return std::ceil(dim_x / h) * std::ceil(dim_y / h) * std::ceil(dim_z / h);
}

}  // namespace mmstencil
