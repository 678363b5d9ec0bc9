#include "mmstencil/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <exception>
#include <future>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "parallel_internal.hpp"

namespace mmstencil {

namespace {

Precision precision_for(std::size_t elem) {
  return elem == 4 ? Precision::F32 : Precision::F64;
}

}  // namespace

WorkerPlan plan_workers(Dims3 interior, int workers, bool snoop, Precision p,
                        const MachineModel& m, Dims3 halo_b, std::int64_t block_z) {
  if (workers < 1) throw PlanError("worker count must be positive");
  if (interior.x < 1 || interior.y < 1 || interior.z < 1)
    throw PlanError("interior extents must be positive");

  Dims3 b = halo_b;
  if (b.x <= 0 && b.y <= 0 && b.z <= 0) {
    b = default_brick(p);
    if (interior.z == 1) b.z = 0;
  }
  const int vl = default_vector_length(p);
  const std::int64_t bz =
      interior.z == 1 ? 1 : (block_z > 0 ? block_z : default_tile_count(p));
  if (interior.y % vl != 0)
    throw PlanError("interior y extent is not divisible by the row-block height");
  const std::int64_t yblocks = interior.y / vl;
  if (workers > yblocks)
    throw PlanError("more workers (" + std::to_string(workers) + ") than row blocks (" +
                    std::to_string(yblocks) + ")");

  // Largest block-aligned tile height whose working slice fits the cache.
  const std::int64_t eb = element_bytes(p);
  const std::int64_t px = interior.x + 2 * b.x;
  const std::int64_t pz = bz + 2 * b.z;
  const std::int64_t rows_budget = m.llc_bytes / (eb * px * pz) - 2 * b.y;
  const std::int64_t tile_y = rows_budget > 0 ? rows_budget / vl * vl : 0;
  if (tile_y < vl)
    throw InfeasibleError("no block-aligned worker tile slice fits the cache budget");

  WorkerPlan plan;
  plan.workers = workers;
  plan.snoop = snoop;
  plan.interior = interior;
  std::int64_t y = 0;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t rows = (yblocks / workers + (w < yblocks % workers ? 1 : 0)) * vl;
    std::int64_t done = 0;
    while (done < rows) {
      const std::int64_t h = std::min(tile_y, rows - done);
      WorkerTile t;
      t.worker = w;
      t.origin = {0, y + done, 0};
      t.extent = {interior.x, h, interior.z};
      plan.tiles.push_back(t);
      done += h;
    }
    y += rows;
  }
  for (WorkerTile& t : plan.tiles) {
    t.y_lo_neighbor = t.origin.y > 0;
    t.y_hi_neighbor = t.origin.y + t.extent.y < interior.y;
  }
  return plan;
}

template <typename T>
ParallelResult<T> execute_parallel(const StencilSpec& spec, const Grid3<T>& in,
                                   const WorkerPlan& plan, const KernelOptions& opt,
                                   const MachineModel& m) {
  const Precision p = precision_for(sizeof(T));
  if (plan.workers < 1) throw PlanError("worker plan has no workers");
  if (!(plan.interior == in.interior()))
    throw PlanError("worker plan interior does not match the grid");
  const bool two_d = in.interior().z == 1;
  if ((spec.dims == 2) != two_d)
    throw ShapeError("stencil dimensionality does not match the grid");
  const Dims3 reach = spec.reach();
  for (int a = 0; a < 3; ++a) {
    if (in.halo()[a] < reach[a])
      throw HaloError(std::string("grid halo smaller than the stencil reach on ") +
                      axis_name(a));
  }

  Dims3 brick = opt.brick;
  if (brick.x <= 0 || brick.y <= 0 || brick.z <= 0) brick = default_brick(p);
  if (two_d) brick.z = 1;

  ParallelResult<T> res{Grid3<T>(in.interior(), in.halo()), {}, {}};
  res.blocks_per_worker.assign(static_cast<std::size_t>(plan.workers), 0);

  std::optional<BrickGrid<T>> brick_storage;
  std::optional<GridSource<T>> src;
  if (opt.layout == Layout::Brick) {
    brick_storage.emplace(to_brick(in, brick));
    src.emplace(*brick_storage);
  } else {
    src.emplace(in);
  }

  std::vector<std::vector<const WorkerTile*>> per(static_cast<std::size_t>(plan.workers));
  for (const WorkerTile& t : plan.tiles) {
    if (t.worker < 0 || t.worker >= plan.workers)
      throw PlanError("tile assigned to a worker outside the plan");
    per[static_cast<std::size_t>(t.worker)].push_back(&t);
  }

  KernelOptions wopt = opt;
  wopt.collect_trace = false;  // per-thread traces cannot interleave meaningfully

  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(plan.workers));
  threads.reserve(per.size());
  for (int w = 0; w < plan.workers; ++w) {
    threads.emplace_back([&, w]() {
      try {
        TileEngine<T> e(default_vector_length(p), default_tile_count(p));
        for (const WorkerTile* t : per[static_cast<std::size_t>(w)])
          run_tile(e, spec, *src, res.out, t->origin, t->extent, wopt);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (std::thread& th : threads) th.join();
  for (std::exception_ptr& err : errors)
    if (err) std::rethrow_exception(err);

  Dims3 traffic_halo = reach;
  if (opt.layout == Layout::Brick) {
    traffic_halo = Dims3{(reach.x + brick.x - 1) / brick.x * brick.x,
                         (reach.y + brick.y - 1) / brick.y * brick.y,
                         (reach.z + brick.z - 1) / brick.z * brick.z};
  }
  const int vl = default_vector_length(p);
  const std::int64_t bz =
      two_d ? 1 : (opt.block_z > 0 ? opt.block_z : default_tile_count(p));
  double padded_sum = 0.0;
  double halo_sum = 0.0;
  for (const WorkerTile& t : plan.tiles) {
    TrafficOptions to;
    to.snoop = plan.snoop;
    to.write_alloc_avoided = true;
    to.y_lo = t.y_lo_neighbor;
    to.y_hi = t.y_hi_neighbor;
    to.z_lo = false;  // worker tiles span the full depth
    to.z_hi = false;
    const TrafficReport r = traffic_model(spec, t.extent, traffic_halo, p, m, to);
    res.traffic.mainmem_lines_read += r.mainmem_lines_read;
    res.traffic.mainmem_lines_written += r.mainmem_lines_written;
    res.traffic.neighbor_cache_lines += r.neighbor_cache_lines;
    const double vp = double(t.extent.x + 2 * traffic_halo.x) *
                      double(t.extent.y + 2 * traffic_halo.y) *
                      double(t.extent.z + 2 * traffic_halo.z);
    padded_sum += vp;
    halo_sum += vp - double(t.extent.volume());
    res.blocks_per_worker[static_cast<std::size_t>(t.worker)] +=
        t.extent.volume() / (std::int64_t(vl) * vl * bz);
  }
  res.traffic.redundant_line_fraction = padded_sum > 0.0 ? halo_sum / padded_sum : 0.0;
  res.traffic.distinct_streams = count_streams(spec, Dims3{0, 0, 0}, Dims3{vl, vl, bz},
                                               in.interior(), in.halo(), opt.layout, brick);
  return res;
}

bool regions_overlap(const MemRegion& a, const MemRegion& b) {
  if (a.arena != b.arena) return false;
  for (int i = 0; i < 3; ++i) {
    if (a.origin[i] + a.extent[i] <= b.origin[i]) return false;
    if (b.origin[i] + b.extent[i] <= a.origin[i]) return false;
  }
  return true;
}

struct SdmaEngine::Impl {
  struct Pending {
    CopyTask task;
    std::uint64_t handle = 0;
    std::uint64_t delay_us = 0;
  };
  struct Flight {
    std::uint64_t handle = 0;
    MemRegion src;
    MemRegion dst;
  };

  Config cfg;
  mutable std::mutex mu;
  std::condition_variable task_cv;  // worker wake-ups and submit backpressure
  std::condition_variable done_cv;
  std::deque<Pending> queue;
  std::vector<Flight> inflight;  // submitted and not yet completed
  std::unordered_set<std::uint64_t> done;
  std::vector<std::thread> threads;
  Stats stat;
  std::vector<CopyTask> tasklog;
  std::mt19937_64 rng;
  std::uint64_t next_handle = 1;
  bool stop = false;

  explicit Impl(const Config& c) : cfg(c), rng(c.seed) {
    if (cfg.channels < 1) throw ConfigError("channel count must be positive");
    const int n = std::min(cfg.channels, 4);
    threads.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) threads.emplace_back([this] { worker(); });
  }

  ~Impl() {
    {
      std::lock_guard<std::mutex> lk(mu);
      stop = true;
    }
    task_cv.notify_all();
    for (std::thread& t : threads) t.join();
  }

  static void perform(const CopyTask& t) {
    const std::int64_t eb = static_cast<std::int64_t>(t.elem_bytes);
    const char* src = static_cast<const char*>(t.src_base);
    char* dst = static_cast<char*>(t.dst_base);
    const std::size_t row_bytes = static_cast<std::size_t>(t.extent.x) * t.elem_bytes;
    for (std::int64_t z = 0; z < t.extent.z; ++z) {
      for (std::int64_t y = 0; y < t.extent.y; ++y) {
        const char* s = src + (z * t.src_plane_stride + y * t.src_row_stride) * eb;
        char* d = dst + (z * t.dst_plane_stride + y * t.dst_row_stride) * eb;
        std::memcpy(d, s, row_bytes);
      }
    }
  }

  void worker() {
    std::unique_lock<std::mutex> lk(mu);
    for (;;) {
      task_cv.wait(lk, [&] { return stop || !queue.empty(); });
      if (queue.empty()) return;  // stop requested and nothing left to drain
      Pending p = std::move(queue.front());
      queue.pop_front();
      lk.unlock();
      if (p.delay_us > 0)
        std::this_thread::sleep_for(std::chrono::microseconds(p.delay_us));
      perform(p.task);
      lk.lock();
      inflight.erase(std::find_if(inflight.begin(), inflight.end(),
                                  [&](const Flight& f) { return f.handle == p.handle; }));
      done.insert(p.handle);
      done_cv.notify_all();
      task_cv.notify_all();  // release submit backpressure
    }
  }
};

SdmaEngine::SdmaEngine() : SdmaEngine(Config{}) {}

SdmaEngine::SdmaEngine(const Config& cfg) : impl_(std::make_unique<Impl>(cfg)) {}
SdmaEngine::~SdmaEngine() = default;

std::uint64_t SdmaEngine::submit(const CopyTask& task) {
  if (task.src_base == nullptr || task.dst_base == nullptr)
    throw std::invalid_argument("copy task needs source and destination pointers");
  if (task.extent.x < 1 || task.extent.y < 1 || task.extent.z < 1 || task.elem_bytes == 0)
    throw std::invalid_argument("copy task extent is empty");

  Impl& im = *impl_;
  std::unique_lock<std::mutex> lk(im.mu);
  im.task_cv.wait(lk, [&] {
    return static_cast<std::int64_t>(im.inflight.size()) <
           static_cast<std::int64_t>(im.cfg.channels);
  });
  for (const Impl::Flight& f : im.inflight) {
    if (regions_overlap(task.dst_region, f.dst) || regions_overlap(task.dst_region, f.src) ||
        regions_overlap(task.src_region, f.dst)) {
      throw ConflictError("copy task races an in-flight transfer in arena " +
                          std::to_string(task.dst_region.arena));
    }
  }
  const std::uint64_t handle = im.next_handle++;
  std::uint64_t delay = 0;
  if (im.cfg.max_delay_us > 0) {
    std::uniform_int_distribution<std::uint64_t> d(
        0, static_cast<std::uint64_t>(im.cfg.max_delay_us));
    delay = d(im.rng);
  }
  im.inflight.push_back({handle, task.src_region, task.dst_region});
  im.queue.push_back({task, handle, delay});
  im.stat.tasks += 1;
  im.stat.bytes += static_cast<std::uint64_t>(task.extent.volume()) * task.elem_bytes;
  if (im.cfg.record_log) im.tasklog.push_back(task);
  im.task_cv.notify_all();
  return handle;
}

void SdmaEngine::wait(std::uint64_t handle) {
  Impl& im = *impl_;
  std::unique_lock<std::mutex> lk(im.mu);
  if (handle == 0 || handle >= im.next_handle)
    throw std::invalid_argument("unknown copy handle");
  im.done_cv.wait(lk, [&] { return im.done.count(handle) != 0; });
}

void SdmaEngine::wait_all() {
  Impl& im = *impl_;
  std::unique_lock<std::mutex> lk(im.mu);
  im.done_cv.wait(lk, [&] { return im.inflight.empty(); });
}

SdmaEngine::Stats SdmaEngine::stats() const {
  std::lock_guard<std::mutex> lk(impl_->mu);
  return impl_->stat;
}

std::vector<CopyTask> SdmaEngine::log() const {
  std::lock_guard<std::mutex> lk(impl_->mu);
  return impl_->tasklog;
}

const char* to_string(ExchangeMode m) {
  return m == ExchangeMode::Sdma ? "sdma" : "message";
}

const char* to_string(PipelineEventKind k) {
  switch (k) {
    case PipelineEventKind::IssueExchange: return "issue_exchange";
    case PipelineEventKind::CompleteExchange: return "complete_exchange";
    case PipelineEventKind::BeginCompute: return "begin_compute";
    case PipelineEventKind::EndCompute: return "end_compute";
  }
  return "unknown";
}

Dims3 exchange_face_extent(Dims3 interior, Dims3 width, int axis) {
  if (axis == 0) return {width.x, interior.y, interior.z};
  if (axis == 1) return {interior.x + 2 * width.x, width.y, interior.z};
  if (axis == 2) return {interior.x + 2 * width.x, interior.y + 2 * width.y, width.z};
  throw std::invalid_argument("axis out of range");
}

template <typename T>
void halo_exchange(std::vector<DomainField<T>>& domains, Dims3 proc, Dims3 width,
                   ExchangeMode mode, SdmaEngine& engine) {
  detail::validate_domains(domains, proc, width);
  const Dims3 n = domains[0].grid->interior();
  detail::exchange_slab(domains, proc, width, mode, engine, 0, n.z, true, true);
}

void dump_schedule_jsonl(const PipelineSchedule& s, std::ostream& os) {
  for (const PipelineEvent& e : s.events) {
    nlohmann::json j;
    j["seq"] = e.seq;
    j["event"] = to_string(e.kind);
    j["layer"] = e.layer;
    j["domain"] = e.domain;
    os << j.dump() << '\n';
  }
}

ScheduleCheck check_pipeline_schedule(const PipelineSchedule& s) {
  ScheduleCheck res;
  auto fail = [&](std::string msg) {
    res.ok = false;
    res.violations.push_back(std::move(msg));
  };
  const int L = s.layers;
  const int D = s.domains;
  if (L < 1 || D < 1) {
    fail("schedule has no layers or no domains");
    return res;
  }

  constexpr std::uint64_t none = ~std::uint64_t(0);
  std::vector<std::uint64_t> issue(static_cast<std::size_t>(L), none);
  std::vector<std::uint64_t> complete(static_cast<std::size_t>(L), none);
  std::vector<std::vector<std::uint64_t>> begin(
      static_cast<std::size_t>(L), std::vector<std::uint64_t>(static_cast<std::size_t>(D), none));
  auto end = begin;
  std::vector<std::uint64_t> seqs;
  seqs.reserve(s.events.size());

  for (const PipelineEvent& e : s.events) {
    seqs.push_back(e.seq);
    if (e.layer < 0 || e.layer >= L) {
      fail("event layer out of range");
      continue;
    }
    const std::size_t l = static_cast<std::size_t>(e.layer);
    switch (e.kind) {
      case PipelineEventKind::IssueExchange:
        if (issue[l] != none) fail("duplicate issue for layer " + std::to_string(e.layer));
        issue[l] = e.seq;
        break;
      case PipelineEventKind::CompleteExchange:
        if (complete[l] != none)
          fail("duplicate completion for layer " + std::to_string(e.layer));
        complete[l] = e.seq;
        break;
      case PipelineEventKind::BeginCompute:
      case PipelineEventKind::EndCompute: {
        if (e.domain < 0 || e.domain >= D) {
          fail("event domain out of range");
          break;
        }
        auto& slot = (e.kind == PipelineEventKind::BeginCompute ? begin : end);
        auto& cell = slot[l][static_cast<std::size_t>(e.domain)];
        if (cell != none)
          fail("duplicate compute event for layer " + std::to_string(e.layer));
        cell = e.seq;
        break;
      }
    }
  }

  std::sort(seqs.begin(), seqs.end());
  if (std::adjacent_find(seqs.begin(), seqs.end()) != seqs.end())
    fail("duplicate sequence numbers");
  for (int l = 0; l < L; ++l) {
    const std::size_t li = static_cast<std::size_t>(l);
    if (issue[li] == none) fail("layer " + std::to_string(l) + " was never issued");
    if (complete[li] == none) fail("layer " + std::to_string(l) + " never completed");
    for (int d = 0; d < D; ++d) {
      if (begin[li][static_cast<std::size_t>(d)] == none ||
          end[li][static_cast<std::size_t>(d)] == none)
        fail("layer " + std::to_string(l) + " domain " + std::to_string(d) +
             " compute events missing");
    }
  }
  if (!res.ok) return res;

  for (int l = 0; l < L; ++l) {
    const std::size_t li = static_cast<std::size_t>(l);
    const std::uint64_t first_begin =
        *std::min_element(begin[li].begin(), begin[li].end());
    if (issue[li] >= complete[li])
      fail("layer " + std::to_string(l) + " completed before it was issued");
    if (complete[li] >= first_begin)
      fail("layer " + std::to_string(l) + " compute began before its exchange completed");
    if (l + 1 < L && issue[li + 1] >= first_begin)
      fail("layer " + std::to_string(l + 1) +
           " exchange was not issued by the time layer " + std::to_string(l) +
           " compute began");
    for (int d = 0; d < D; ++d) {
      const std::size_t di = static_cast<std::size_t>(d);
      if (begin[li][di] >= end[li][di])
        fail("layer " + std::to_string(l) + " domain " + std::to_string(d) +
             " compute interval is inverted");
      if (l + 1 < L && end[li][di] >= begin[li + 1][di])
        fail("domain " + std::to_string(d) + " compute intervals overlap across layers " +
             std::to_string(l) + " and " + std::to_string(l + 1));
    }
  }
  return res;
}

template <typename T>
PipelineResult<T> run_pipelined(const StencilSpec& spec, std::vector<DomainField<T>>& domains,
                                Dims3 proc, int layers, ExchangeMode mode, SdmaEngine& engine,
                                const KernelOptions& opt) {
  const Precision p = precision_for(sizeof(T));
  const Dims3 w = spec.reach();
  detail::validate_domains(domains, proc, w);
  if (layers < 1) throw PlanError("pipeline needs at least one layer");
  if (opt.layout != Layout::Flat)
    throw PlanError("the pipelined sweep runs on flat domain storage");
  const Dims3 n = domains[0].grid->interior();
  const bool two_d = n.z == 1;
  if ((spec.dims == 2) != two_d)
    throw ShapeError("stencil dimensionality does not match the grid");
  if (n.z % layers != 0) throw PlanError("pipeline layers must divide the domain depth");
  const std::int64_t slab = n.z / layers;
  const std::int64_t bz =
      two_d ? 1 : (opt.block_z > 0 ? opt.block_z : default_tile_count(p));
  if (slab % bz != 0)
    throw PlanError("pipeline slab depth must be divisible by the block depth");

  PipelineResult<T> res;
  res.schedule.layers = layers;
  res.schedule.domains = static_cast<int>(domains.size());
  res.out.reserve(domains.size());
  for (const DomainField<T>& d : domains) res.out.emplace_back(n, d.grid->halo());

  std::mutex ev_mu;
  std::uint64_t seq = 0;
  auto log_event = [&](PipelineEventKind k, int domain, int layer) {
    std::lock_guard<std::mutex> lk(ev_mu);
    res.schedule.events.push_back({k, domain, layer, seq++});
  };

  // Exchange slab l covers interior rows [l*slab + w.z, (l+1)*slab + w.z),
  // clipped to [0, n.z), plus the z faces on the first and last layer.
  // The +w.z shift makes compute of layer l read only halos that exchanges
  // 0..l delivered, so the l+1 exchange can overlap it safely.
  auto clip_lo = [&](int l) { return l == 0 ? std::int64_t(0) : l * slab + w.z; };
  auto clip_hi = [&](int l) { return std::min(n.z, (l + 1) * slab + w.z); };

  std::mutex qmu;
  std::condition_variable qcv;
  std::deque<int> pending;
  bool qstop = false;

  std::vector<std::promise<void>> xdone(static_cast<std::size_t>(layers));
  std::vector<std::future<void>> xfut;
  xfut.reserve(xdone.size());
  for (std::promise<void>& pr : xdone) xfut.push_back(pr.get_future());

  std::thread orch([&] {
    for (;;) {
      int l;
      {
        std::unique_lock<std::mutex> lk(qmu);
        qcv.wait(lk, [&] { return qstop || !pending.empty(); });
        if (pending.empty()) return;
        l = pending.front();
        pending.pop_front();
      }
      try {
        detail::exchange_slab(domains, proc, w, mode, engine, clip_lo(l),
                      std::max(clip_lo(l), clip_hi(l)), l == 0, l == layers - 1);
        log_event(PipelineEventKind::CompleteExchange, -1, l);
        xdone[static_cast<std::size_t>(l)].set_value();
      } catch (...) {
        xdone[static_cast<std::size_t>(l)].set_exception(std::current_exception());
      }
    }
  });

  auto issue = [&](int l) {
    log_event(PipelineEventKind::IssueExchange, -1, l);
    {
      std::lock_guard<std::mutex> lk(qmu);
      pending.push_back(l);
    }
    qcv.notify_one();
  };
  auto stop_orchestrator = [&] {
    {
      std::lock_guard<std::mutex> lk(qmu);
      qstop = true;
    }
    qcv.notify_all();
    orch.join();
  };

  KernelOptions wopt = opt;
  wopt.collect_trace = false;

  try {
    std::vector<TileEngine<T>> engines;
    engines.reserve(domains.size());
    for (std::size_t d = 0; d < domains.size(); ++d)
      engines.emplace_back(default_vector_length(p), default_tile_count(p));

    issue(0);
    for (int l = 0; l < layers; ++l) {
      if (l + 1 < layers) issue(l + 1);
      xfut[static_cast<std::size_t>(l)].get();
      for (std::size_t d = 0; d < domains.size(); ++d) {
        log_event(PipelineEventKind::BeginCompute, static_cast<int>(d), l);
        GridSource<T> src(*domains[d].grid);
        run_tile(engines[d], spec, src, res.out[d], Dims3{0, 0, l * slab},
                 Dims3{n.x, n.y, slab}, wopt);
        log_event(PipelineEventKind::EndCompute, static_cast<int>(d), l);
      }
    }
  } catch (...) {
    stop_orchestrator();
    throw;
  }
  stop_orchestrator();
  return res;
}

DecompositionPlan decomp_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad decomposition json: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("decomposition json must be an object");
  DecompositionPlan p;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& key = it.key();
      if (key == "proc") {
        if (!it->is_array() || it->size() != 3)
          throw ConfigError("proc must be a 3-element array");
        p.proc = {(*it)[0].get<std::int64_t>(), (*it)[1].get<std::int64_t>(),
                  (*it)[2].get<std::int64_t>()};
      } else if (key == "pipeline_layers") {
        p.pipeline_layers = it->get<int>();
      } else if (key == "mode") {
        const std::string s = it->get<std::string>();
        if (s == "sdma")
          p.mode = ExchangeMode::Sdma;
        else if (s == "message")
          p.mode = ExchangeMode::Message;
        else
          throw ConfigError("unknown exchange mode \"" + s + "\"");
      } else {
        throw ConfigError("unknown decomposition key \"" + key + "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad decomposition json: ") + e.what());
  }
  if (p.proc.x < 1 || p.proc.y < 1 || p.proc.z < 1)
    throw ConfigError("proc extents must be positive");
  if (p.pipeline_layers < 1) throw ConfigError("pipeline_layers must be positive");
  return p;
}

std::string decomp_to_json(const DecompositionPlan& p) {
  nlohmann::json j;
  j["proc"] = {p.proc.x, p.proc.y, p.proc.z};
  j["pipeline_layers"] = p.pipeline_layers;
  j["mode"] = to_string(p.mode);
  return j.dump(2);
}

template <typename T>
std::vector<DomainField<T>> split_grid(const Grid3<T>& global, Dims3 proc, Dims3 halo,
                                       std::vector<Grid3<T>>& storage) {
  if (proc.x < 1 || proc.y < 1 || proc.z < 1)
    throw PlanError("process grid extents must be positive");
  for (int a = 0; a < 3; ++a) {
    if (global.interior()[a] % proc[a] != 0)
      throw PlanError(std::string("process grid does not divide the interior on ") +
                      axis_name(a));
  }
  const Dims3 n{global.interior().x / proc.x, global.interior().y / proc.y,
                global.interior().z / proc.z};
  storage.clear();
  storage.reserve(static_cast<std::size_t>(proc.volume()));
  for (std::int64_t cz = 0; cz < proc.z; ++cz)
    for (std::int64_t cy = 0; cy < proc.y; ++cy)
      for (std::int64_t cx = 0; cx < proc.x; ++cx) {
        storage.emplace_back(n, halo);
        Grid3<T>& g = storage.back();
        const Dims3 base{cx * n.x, cy * n.y, cz * n.z};
        for (std::int64_t z = 0; z < n.z; ++z)
          for (std::int64_t y = 0; y < n.y; ++y) {
            const T* srow = global.data() + global.offset(base.x, base.y + y, base.z + z);
            T* drow = g.data() + g.offset(0, y, z);
            std::copy(srow, srow + n.x, drow);
          }
      }
  std::vector<DomainField<T>> fields;
  fields.reserve(storage.size());
  for (std::size_t i = 0; i < storage.size(); ++i) {
    const std::int64_t idx = static_cast<std::int64_t>(i);
    fields.push_back({&storage[i],
                      {idx % proc.x, (idx / proc.x) % proc.y, idx / (proc.x * proc.y)},
                      static_cast<int>(i)});
  }
  return fields;
}

template <typename T>
void gather_grid(const std::vector<DomainField<T>>& domains, Dims3 proc, Grid3<T>& global) {
  detail::validate_domains(domains, proc, Dims3{0, 0, 0});
  const Dims3 n = domains[0].grid->interior();
  if (!(global.interior() == Dims3{n.x * proc.x, n.y * proc.y, n.z * proc.z}))
    throw PlanError("global interior does not match the domain tiling");
  for (const DomainField<T>& d : domains) {
    const Grid3<T>& g = *d.grid;
    const Dims3 base{d.coords.x * n.x, d.coords.y * n.y, d.coords.z * n.z};
    for (std::int64_t z = 0; z < n.z; ++z)
      for (std::int64_t y = 0; y < n.y; ++y) {
        const T* srow = g.data() + g.offset(0, y, z);
        T* drow = global.data() + global.offset(base.x, base.y + y, base.z + z);
        std::copy(srow, srow + n.x, drow);
      }
  }
}

#define MMSTENCIL_PARALLEL_INST(T)                                                         \
  template ParallelResult<T> execute_parallel<T>(                                          \
      const StencilSpec&, const Grid3<T>&, const WorkerPlan&, const KernelOptions&,        \
      const MachineModel&);                                                                \
  template void halo_exchange<T>(std::vector<DomainField<T>>&, Dims3, Dims3, ExchangeMode, \
                                 SdmaEngine&);                                             \
  template PipelineResult<T> run_pipelined<T>(const StencilSpec&,                          \
                                              std::vector<DomainField<T>>&, Dims3, int,    \
                                              ExchangeMode, SdmaEngine&,                   \
                                              const KernelOptions&);                       \
  template std::vector<DomainField<T>> split_grid<T>(const Grid3<T>&, Dims3, Dims3,        \
                                                     std::vector<Grid3<T>>&);              \
  template void gather_grid<T>(const std::vector<DomainField<T>>&, Dims3, Grid3<T>&);

MMSTENCIL_PARALLEL_INST(float)
MMSTENCIL_PARALLEL_INST(double)
#undef MMSTENCIL_PARALLEL_INST

}  // namespace mmstencil
