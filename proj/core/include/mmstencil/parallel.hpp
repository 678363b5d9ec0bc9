// Multi-worker execution, the async copy engine, halo exchange between
// decomposed domains, and the z-layer compute/exchange pipeline.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "mmstencil/analysis.hpp"
#include "mmstencil/grid.hpp"
#include "mmstencil/kernels.hpp"

namespace mmstencil {

struct WorkerTile {
  int worker = 0;
  Dims3 origin{0, 0, 0};
  Dims3 extent{0, 0, 0};
  bool y_lo_neighbor = false;  // another tile owns the adjacent rows below
  bool y_hi_neighbor = false;
};

struct WorkerPlan {
  int workers = 1;
  bool snoop = false;
  Dims3 interior{0, 0, 0};
  std::vector<WorkerTile> tiles;
};

// Splits the grid into y-adjacent worker slabs, each subdivided into tiles
// of full x and z extent whose working slice (depth block_z, halo widths
// halo_b on each face) fits the last-level cache. Tile heights are
// block-aligned. halo_b/block_z of zero pick the precision defaults.
WorkerPlan plan_workers(Dims3 interior, int workers, bool snoop, Precision p,
                        const MachineModel& m, Dims3 halo_b = {0, 0, 0},
                        std::int64_t block_z = 0);

template <typename T>
struct ParallelResult {
  Grid3<T> out;
  TrafficReport traffic;                    // analytic, summed over tiles
  std::vector<std::int64_t> blocks_per_worker;
};

// Runs the stencil with one thread per worker over the planned tiles.
// Results are bitwise-invariant in the worker count.
template <typename T>
ParallelResult<T> execute_parallel(const StencilSpec& spec, const Grid3<T>& in,
                                   const WorkerPlan& plan, const KernelOptions& opt = {},
                                   const MachineModel& m = {});

// Axis-aligned element box inside one memory arena (padded-frame coords).
struct MemRegion {
  int arena = 0;
  Dims3 origin{0, 0, 0};
  Dims3 extent{0, 0, 0};
};

bool regions_overlap(const MemRegion& a, const MemRegion& b);

struct CopyTask {
  const void* src_base = nullptr;  // first source element
  void* dst_base = nullptr;
  std::int64_t src_row_stride = 0;  // strides in elements
  std::int64_t src_plane_stride = 0;
  std::int64_t dst_row_stride = 0;
  std::int64_t dst_plane_stride = 0;
  Dims3 extent{0, 0, 0};
  std::size_t elem_bytes = 0;
  MemRegion src_region;
  MemRegion dst_region;
};

// Asynchronous block-copy engine with a bounded channel count. Submitting
// a task that would race an in-flight transfer in the same arena (its
// destination overlapping an in-flight source or destination, or its
// source overlapping an in-flight destination) is a ConflictError;
// completed tasks leave the conflict window. Optional seeded latency
// injection delays task starts without affecting results.
class SdmaEngine {
 public:
  struct Config {
    int channels = 160;
    std::uint64_t seed = 0;
    int max_delay_us = 0;   // per-task random start delay in [0, max]
    bool record_log = false;
  };
  struct Stats {
    std::uint64_t tasks = 0;
    std::uint64_t bytes = 0;
  };

  SdmaEngine();
  explicit SdmaEngine(const Config& cfg);
  ~SdmaEngine();
  SdmaEngine(const SdmaEngine&) = delete;
  SdmaEngine& operator=(const SdmaEngine&) = delete;

  std::uint64_t submit(const CopyTask& task);
  void wait(std::uint64_t handle);
  void wait_all();
  Stats stats() const;
  // Submitted task descriptors, in submit order (when record_log is set).
  std::vector<CopyTask> log() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

enum class ExchangeMode { Sdma, Message };

const char* to_string(ExchangeMode m);

template <typename T>
struct DomainField {
  Grid3<T>* grid = nullptr;
  Dims3 coords{0, 0, 0};  // position in the process grid
  int arena = 0;
};

// Fills interior-facing halos of width `width` for every domain, axis by
// axis (x, then y, then z); later axes copy rows padded by the already
// exchanged halos, so edges and corners arrive complete. Message mode
// packs faces through staging buffers instead of direct copies.
template <typename T>
void halo_exchange(std::vector<DomainField<T>>& domains, Dims3 proc, Dims3 width,
                   ExchangeMode mode, SdmaEngine& engine);

// Face extents produced by halo_exchange for a domain interior `n`:
// axis 0 faces are (w.x, n.y, n.z), axis 1 (n.x+2w.x, w.y, n.z),
// axis 2 (n.x+2w.x, n.y+2w.y, w.z).
Dims3 exchange_face_extent(Dims3 interior, Dims3 width, int axis);

enum class PipelineEventKind { IssueExchange, CompleteExchange, BeginCompute, EndCompute };

const char* to_string(PipelineEventKind k);

struct PipelineEvent {
  PipelineEventKind kind = PipelineEventKind::IssueExchange;
  int domain = -1;  // -1: all domains (exchange batches are global)
  int layer = 0;
  std::uint64_t seq = 0;
};

struct PipelineSchedule {
  int layers = 0;
  int domains = 0;
  std::vector<PipelineEvent> events;
};

void dump_schedule_jsonl(const PipelineSchedule& s, std::ostream& os);

struct ScheduleCheck {
  bool ok = true;
  std::vector<std::string> violations;
};

// Verifies: every layer's exchange completes before its compute begins,
// the next layer's exchange is issued no later than this layer's compute
// begins, and per-domain compute intervals are ordered and disjoint.
ScheduleCheck check_pipeline_schedule(const PipelineSchedule& s);

template <typename T>
struct PipelineResult {
  std::vector<Grid3<T>> out;  // per domain, same order as the input
  PipelineSchedule schedule;
};

// One stencil application over decomposed domains with the halo exchange
// split into `layers` z-slabs and overlapped with compute: the slab l+1
// exchange is in flight while slab l computes. Values are bitwise equal to
// a full exchange followed by a full sweep.
template <typename T>
PipelineResult<T> run_pipelined(const StencilSpec& spec, std::vector<DomainField<T>>& domains,
                                Dims3 proc, int layers, ExchangeMode mode, SdmaEngine& engine,
                                const KernelOptions& opt = {});

struct DecompositionPlan {
  Dims3 proc{1, 1, 1};
  int pipeline_layers = 1;
  ExchangeMode mode = ExchangeMode::Sdma;
};

DecompositionPlan decomp_from_json(const std::string& text);
std::string decomp_to_json(const DecompositionPlan& p);

// Splits a global grid into proc-volume domains (each axis must divide
// evenly). Only interiors are copied; every domain halo starts zeroed and
// sibling-facing halos are filled by halo_exchange, which reproduces a
// zero-haloed global grid exactly.
template <typename T>
std::vector<DomainField<T>> split_grid(const Grid3<T>& global, Dims3 proc, Dims3 halo,
                                       std::vector<Grid3<T>>& storage);

template <typename T>
void gather_grid(const std::vector<DomainField<T>>& domains, Dims3 proc, Grid3<T>& global);

#define MMSTENCIL_PARALLEL_EXTERN(T)                                                        \
  extern template ParallelResult<T> execute_parallel<T>(                                    \
      const StencilSpec&, const Grid3<T>&, const WorkerPlan&, const KernelOptions&,         \
      const MachineModel&);                                                                 \
  extern template void halo_exchange<T>(std::vector<DomainField<T>>&, Dims3, Dims3,        \
                                        ExchangeMode, SdmaEngine&);                         \
  extern template PipelineResult<T> run_pipelined<T>(                                       \
      const StencilSpec&, std::vector<DomainField<T>>&, Dims3, int, ExchangeMode,           \
      SdmaEngine&, const KernelOptions&);                                                   \
  extern template std::vector<DomainField<T>> split_grid<T>(const Grid3<T>&, Dims3, Dims3, \
                                                            std::vector<Grid3<T>>&);       \
  extern template void gather_grid<T>(const std::vector<DomainField<T>>&, Dims3,           \
                                      Grid3<T>&);

MMSTENCIL_PARALLEL_EXTERN(float)
MMSTENCIL_PARALLEL_EXTERN(double)
#undef MMSTENCIL_PARALLEL_EXTERN

}  // namespace mmstencil
