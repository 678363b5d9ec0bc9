// Analytic performance models: machine description, matrix-vs-SIMD stencil
// throughput ratio, memory-stream enumeration, cache-tiling reuse ratios,
// a per-tile traffic model, roofline classification, and problem sizing.
#pragma once

#include <cstdint>
#include <string>

#include "mmstencil/common.hpp"
#include "mmstencil/stencil_spec.hpp"

namespace mmstencil {

struct MachineModel {
  double cpi_simd = 0.5;            // sustained cycles per SIMD FMA issue
  double cpi_matrix = 2.0;          // sustained cycles per outer-product issue
  int vector_length = 16;           // f32 lanes per vector register
  double frequency_ratio = 1.0;     // matrix-unit clock / SIMD clock
  double simd_peak_flops = 3.75e12; // FLOP/s, fused multiply-add counted as 2
  double peak_bandwidth = 400e9;    // B/s main-memory peak
  std::int64_t llc_bytes = 2 * 1024 * 1024;  // per-core-cluster last-level cache
  int cacheline_bytes = 64;
  int sdma_channels = 160;
};

// Strict parse: unknown keys are ConfigError, missing keys keep defaults.
MachineModel machine_from_json(const std::string& text);
std::string machine_to_json(const MachineModel& m);
MachineModel load_machine(const std::string& path);

struct ExactRatio {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Throughput ratio of the matrix-tile stencil path over the SIMD path for a
// 1D pass of the given radius. Exact rational in the model parameters.
ExactRatio matrix_speedup(int radius, const MachineModel& m);

// Fraction of peak memory bandwidth implied by a sustained stencil rate.
// One stream read plus one stream written per stencil point.
double bandwidth_utilization(double gstencils_per_sec, Precision p, const MachineModel& m);

// Number of maximal runs of consecutive storage addresses touched by one
// block application of the stencil (its exact input footprint). For brick
// layout a whole brick is one consecutive unit and x-adjacent bricks merge.
std::int64_t count_streams(const StencilSpec& spec, Dims3 block_origin, Dims3 block_extent,
                           Dims3 interior, Dims3 halo, Layout layout,
                           Dims3 brick = Dims3{16, 4, 4});

struct ReusePoint {
  std::int64_t tile_x = 0;
  std::int64_t tile_y = 0;
  double ratio = 0.0;
};

double reuse_ratio_classic_at(Dims3 halo_b, std::int64_t tile_x, std::int64_t tile_y);
double reuse_ratio_snoop_at(Dims3 halo_b, std::int64_t tile_x);

// Best reuse ratio over power-of-two (Tile_X, Tile_Y) whose working slice
// of depth vz (plus halos halo_b) fits the last-level cache. Ties break
// toward wider Tile_X. InfeasibleError when no tile fits.
ReusePoint reuse_ratio_classic(Dims3 halo_b, std::int64_t vz, Precision p,
                               const MachineModel& m);
ReusePoint reuse_ratio_snoop(Dims3 halo_b, std::int64_t vz, Precision p,
                             const MachineModel& m);

struct TrafficReport {
  std::int64_t mainmem_lines_read = 0;
  std::int64_t mainmem_lines_written = 0;
  std::int64_t neighbor_cache_lines = 0;  // halo reads served by peer caches
  std::int64_t distinct_streams = 0;
  std::int64_t prefetch_ops = 0;
  double redundant_line_fraction = 0.0;   // halo share of the read footprint

  std::int64_t total_mainmem_lines() const {
    return mainmem_lines_read + mainmem_lines_written;
  }
};

struct TrafficOptions {
  bool snoop = false;               // serve y/z halo reads from peer caches
  bool write_alloc_avoided = true;  // streaming stores skip read-for-ownership
  // Which halo sides have a cache-resident peer (edge tiles have fewer).
  bool y_lo = true, y_hi = true, z_lo = true, z_hi = true;
};

// Per-tile main-memory traffic for one sweep over tile with per-axis halo
// widths halo_b. Reads cover the padded footprint exactly once; snoop mode
// redirects the y and z halo regions to neighbor caches. Line counts are
// conserved: read + neighbor lines always total the padded footprint.
TrafficReport traffic_model(const StencilSpec& spec, Dims3 tile, Dims3 halo_b, Precision p,
                            const MachineModel& m, const TrafficOptions& opt = {});

enum class RooflineClass { MemoryBound, ComputeBound, Both };

const char* to_string(RooflineClass c);

struct RooflineResult {
  double arithmetic_intensity = 0.0;  // FLOP per main-memory byte
  double machine_balance = 0.0;       // peak FLOP/s over peak B/s
  RooflineClass cls = RooflineClass::MemoryBound;
};

// Classifies a kernel swept with the given tile. Within 25% of the machine
// balance counts as both memory- and compute-bound. Write-allocate traffic
// is included (the classification describes a conventional store path).
RooflineResult roofline_classify(const StencilSpec& spec, Dims3 tile, Dims3 halo_b,
                                 Precision p, const MachineModel& m);

// Grid points needed to cover a physical box (meters) at peak frequency f0
// (Hz), minimum velocity vmin (m/s), and points_per_wavelength sampling.
double wave_grid_points(double dim_x, double dim_y, double dim_z, double f0, double vmin,
                        double points_per_wavelength);

}  // namespace mmstencil
