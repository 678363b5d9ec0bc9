// Anisotropic wave propagation (VTI and TTI) built from the tile-engine
// axis passes: per-block derivative composition, leapfrog stepping, and a
// decomposed driver with layered halo/compute overlap.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mmstencil/fd.hpp"
#include "mmstencil/grid.hpp"
#include "mmstencil/kernels.hpp"
#include "mmstencil/parallel.hpp"
#include "mmstencil/tile_engine.hpp"

namespace mmstencil {

// Per-axis central-difference tables with the grid spacing baked in,
// ascending offset order (index k+radius). First derivatives are the
// maximal-order antisymmetric tables at the same radius as the second
// derivatives.
template <typename T>
struct DerivTables {
  int radius = 0;
  std::vector<T> first_x, first_y, first_z;
  std::vector<T> second_x, second_y, second_z;
};

template <typename T>
DerivTables<T> make_deriv_tables(int radius, double hx, double hy, double hz);

// All six second derivatives of one field over one block, plus the two
// first-derivative intermediates the mixed terms are composed from. The
// six outputs cover the plain block extents; dz keeps its y halo (it
// feeds the y pass that forms dyz) and dy spans the previous/current/next
// vector-length column slots (it feeds the x pass that forms dxy).
// Thread-private scratch: reuse one set per worker.
template <typename T>
struct DerivativeSet {
  Dims3 extents{0, 0, 0};
  HostBlock<T> dxx, dyy, dzz;
  HostBlock<T> dxy, dxz, dyz;
  HostBlock<T> dz;  // (x, y + 2r, z)
  HostBlock<T> dy;  // (x + 2r, y, z)
};

// Computes the six second derivatives of p over the block at origin
// (interior coordinates, block-aligned). Pure second derivatives apply
// the 1D second-derivative table directly. Mixed derivatives compose
// first-derivative passes: the z (or y) stencil runs on the previous,
// current and next vector-length-wide column slots, the slot results are
// assembled into an x-extended buffer, and the x stencil runs transposed
// over that. Reads outside the padded grid are treated as zero, so blocks
// touching the domain edge only ever consume real halo cells.
// Requires extent.x == extent.y == vector length, extent.z <= vector
// length, radius <= vector length, origin aligned to the block extents.
template <typename T>
void derivatives_block(TileEngine<T>& e, const Grid3<T>& p, Dims3 origin, Dims3 extent,
                       const DerivTables<T>& tables, DerivativeSet<T>& out);

// VTI medium: two coupled stress fields on a leapfrog pair, per-cell
// Thomsen parameters. Field and material grids share interior and halo;
// halos must cover the stencil radius.
template <typename T>
struct VtiModel {
  Grid3<T> sh, sh_prev;  // horizontal stress at t and t-dt
  Grid3<T> sv, sv_prev;  // vertical stress
  Grid3<T> vp, eps, delta;
  double hx = 1.0, hy = 1.0, hz = 1.0;
  double dt = 1e-3;
  int radius = 4;
};

// TTI medium: p/q wavefield pair with per-cell velocities, shape factor
// alpha and tilt/azimuth angles. alpha must be nonzero on the interior.
template <typename T>
struct TtiModel {
  Grid3<T> p, p_prev;
  Grid3<T> q, q_prev;
  Grid3<T> vpx, vpz, vpn, vsz;
  Grid3<T> alpha, theta, phi;
  double hx = 1.0, hy = 1.0, hz = 1.0;
  double dt = 1e-3;
  int radius = 4;
};

// Zero-filled models with halo = radius on every axis.
template <typename T>
VtiModel<T> make_vti_model(Dims3 interior, int radius, double hx, double hy, double hz,
                           double dt);
template <typename T>
TtiModel<T> make_tti_model(Dims3 interior, int radius, double hx, double hy, double hz,
                           double dt);

// Leapfrog stability: dt limit for the maximal-order scheme,
//   dt <= 2 / (vmax * sqrt(S * (hx^-2 + hy^-2 + hz^-2)))
// where S is the absolute coefficient sum of the unit-spacing second
// derivative. Exceeding the limit flags the step result, it does not
// abort: divergent runs are still observable.
double cfl_dt_limit(int radius, double vmax, double hx, double hy, double hz);

template <typename T>
double vti_velocity_max(const VtiModel<T>& m);
template <typename T>
double tti_velocity_max(const TtiModel<T>& m);

struct StepInfo {
  double dt_limit = 0.0;
  bool dt_within_limit = true;
};

// One block of the VTI update: writes the t+dt fields into *_prev in
// place (each cell only reads its own prev value, so in-place is safe);
// the caller swaps after the full sweep. The per-cell combine runs in
// double and casts once at the store.
template <typename T>
void vti_sweep(TileEngine<T>& e, VtiModel<T>& m, const DerivTables<T>& t, Dims3 origin,
               Dims3 extent);

template <typename T>
void vti_swap(VtiModel<T>& m);

// One full leapfrog step over the interior; swaps the field pair.
template <typename T>
StepInfo vti_step(VtiModel<T>& m);

// Reference step: plain double-precision loops, no tile engine. Slow;
// for validation only.
template <typename T>
StepInfo vti_step_reference(VtiModel<T>& m);

// Pointwise TTI auxiliaries r1 = p - alpha*q and r2 = p/alpha - q over
// padded storage rows z in [zlo, zhi) (interior frame, clamped to the
// halo). Cells with alpha == 0 (uninitialized outer halo) yield zero.
template <typename T>
struct TtiAux {
  Grid3<T> r1, r2;
};

template <typename T>
void tti_update_aux(const TtiModel<T>& m, TtiAux<T>& aux, std::int64_t zlo, std::int64_t zhi);

// Per-worker derivative scratch for the four TTI streams.
template <typename T>
struct TtiScratch {
  DerivativeSet<T> p, q, r1, r2;
};

// One block of the TTI update; aux must be current over the block's
// stencil footprint. Writes t+dt fields into *_prev in place.
template <typename T>
void tti_sweep(TileEngine<T>& e, TtiModel<T>& m, const TtiAux<T>& aux, const DerivTables<T>& t,
               Dims3 origin, Dims3 extent, TtiScratch<T>& scratch);

template <typename T>
void tti_swap(TtiModel<T>& m);

template <typename T>
StepInfo tti_step(TtiModel<T>& m);

template <typename T>
StepInfo tti_step_reference(TtiModel<T>& m);

// Ricker wavelet, peak amplitude 1 at t = t0.
double ricker(double t, double f0, double t0);

// Cerjan-style absorbing boundary: cells within width of the global grid
// edge are scaled by exp(-(alpha*(width-d))^2), d = cell distance to the
// nearest edge. global_origin places this grid's interior inside the
// global interior so decomposed runs damp identically to single-domain
// runs. Axes of global extent 1 are ignored.
template <typename T>
void apply_sponge(Grid3<T>& g, Dims3 global_origin, Dims3 global_interior, int width,
                  double alpha);

// Point source: amplitude * ricker(t) added to both fields of the pair
// at one interior cell after each step.
struct SourceSpec {
  Dims3 cell{-1, -1, -1};  // negative entries mean the grid center
  double f0 = 25.0;
  double t0 = 0.05;
  double amplitude = 1.0;
};

struct SimOptions {
  bool source_enabled = false;
  SourceSpec source;
  int sponge_width = 0;
  double sponge_alpha = 0.015;
  SdmaEngine::Config sdma;
};

// Simulation outcome. Wall-clock figures time the emulation, not the
// modeled machine; bandwidth utilization is the analytic model evaluated
// at the emulated point rate.
struct RtmRunReport {
  int steps = 0;
  double dt = 0.0;
  double dt_limit = 0.0;
  bool dt_within_limit = true;
  double emulated_wall_seconds = 0.0;
  double emulated_points_per_second = 0.0;
  double modeled_bandwidth_utilization = 0.0;
  double max_abs_field = 0.0;
};

std::string report_to_json(const RtmRunReport& r);

// Time-steps the model in place. proc == (1,1,1) runs single-domain;
// otherwise the fields are split, each step exchanges halos slab by slab
// and overlaps the next slab's exchange with compute on the previous one
// (decomp.pipeline_layers slabs per step), and the final fields are
// gathered back. Decomposed and single-domain runs see bitwise-identical
// halo values, so they agree to roundoff.
template <typename T>
RtmRunReport run_simulation(VtiModel<T>& m, int steps, const DecompositionPlan& decomp,
                            const SimOptions& opt = {});
template <typename T>
RtmRunReport run_simulation(TtiModel<T>& m, int steps, const DecompositionPlan& decomp,
                            const SimOptions& opt = {});

// JSON run description: grid, medium, discretization, constant or
// file-backed per-cell materials, source, sponge, decomposition. Unknown
// keys are rejected.
struct RtmConfig {
  std::string medium = "vti";  // "vti" | "tti"
  Precision precision = Precision::F32;
  Dims3 grid{64, 64, 64};
  int radius = 4;
  double hx = 10.0, hy = 10.0, hz = 10.0;
  double dt = 0.0;  // <= 0 derives 0.8x the stability limit
  int steps = 10;
  // Constant material fill-ins; per-cell files override whole fields.
  double vp = 3000.0, eps = 0.24, delta = 0.1;
  double vpx = 3000.0, vpz = 2800.0, vpn = 2900.0, vsz = 1500.0;
  double alpha = 1.0, theta = 0.0, phi = 0.0;
  std::map<std::string, std::string> field_files;
  bool source_enabled = false;
  SourceSpec source;
  int sponge_width = 0;
  double sponge_alpha = 0.015;
  DecompositionPlan decomp;
};

RtmConfig rtm_config_from_json(const std::string& text);
std::string rtm_config_to_json(const RtmConfig& c);

// Model construction from a config: allocates halo = radius, fills
// materials (constants, then file overrides; file interiors must match
// the grid), validates vp > 0, 1 + 2*delta >= 0, alpha != 0, and derives
// dt when the config leaves it unset.
template <typename T>
VtiModel<T> build_vti_model(const RtmConfig& c);
template <typename T>
TtiModel<T> build_tti_model(const RtmConfig& c);

#define MMSTENCIL_RTM_EXTERN(T)                                                               \
  extern template DerivTables<T> make_deriv_tables<T>(int, double, double, double);          \
  extern template void derivatives_block<T>(TileEngine<T>&, const Grid3<T>&, Dims3, Dims3,   \
                                            const DerivTables<T>&, DerivativeSet<T>&);       \
  extern template VtiModel<T> make_vti_model<T>(Dims3, int, double, double, double, double); \
  extern template TtiModel<T> make_tti_model<T>(Dims3, int, double, double, double, double); \
  extern template double vti_velocity_max<T>(const VtiModel<T>&);                            \
  extern template double tti_velocity_max<T>(const TtiModel<T>&);                            \
  extern template void vti_sweep<T>(TileEngine<T>&, VtiModel<T>&, const DerivTables<T>&,     \
                                    Dims3, Dims3);                                           \
  extern template void vti_swap<T>(VtiModel<T>&);                                            \
  extern template StepInfo vti_step<T>(VtiModel<T>&);                                        \
  extern template StepInfo vti_step_reference<T>(VtiModel<T>&);                              \
  extern template void tti_update_aux<T>(const TtiModel<T>&, TtiAux<T>&, std::int64_t,       \
                                         std::int64_t);                                      \
  extern template void tti_sweep<T>(TileEngine<T>&, TtiModel<T>&, const TtiAux<T>&,          \
                                    const DerivTables<T>&, Dims3, Dims3, TtiScratch<T>&);    \
  extern template void tti_swap<T>(TtiModel<T>&);                                            \
  extern template StepInfo tti_step<T>(TtiModel<T>&);                                        \
  extern template StepInfo tti_step_reference<T>(TtiModel<T>&);                              \
  extern template void apply_sponge<T>(Grid3<T>&, Dims3, Dims3, int, double);                \
  extern template RtmRunReport run_simulation<T>(VtiModel<T>&, int, const DecompositionPlan&, \
                                                 const SimOptions&);                          \
  extern template RtmRunReport run_simulation<T>(TtiModel<T>&, int, const DecompositionPlan&, \
                                                 const SimOptions&);                          \
  extern template VtiModel<T> build_vti_model<T>(const RtmConfig&);                          \
  extern template TtiModel<T> build_tti_model<T>(const RtmConfig&);

MMSTENCIL_RTM_EXTERN(float)
MMSTENCIL_RTM_EXTERN(double)
#undef MMSTENCIL_RTM_EXTERN

}  // namespace mmstencil
