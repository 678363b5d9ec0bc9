// Microbenchmarks for the emulator hot paths: kernel sweeps per layout,
// the naive oracle for contrast, wave steps, the pipelined exchange, and
// the analytic searches. Sizes are trimmed so a full run stays in seconds;
// use the CLI bench subcommand for full-size timed runs.

#include <benchmark/benchmark.h>

#include <mmstencil/analysis.hpp>
#include <mmstencil/bench_suite.hpp>
#include <mmstencil/kernels.hpp>
#include <mmstencil/oracle.hpp>
#include <mmstencil/parallel.hpp>
#include <mmstencil/rtm.hpp>

#include <random>
#include <string>
#include <vector>

namespace {

using namespace mmstencil;

template <typename T>
void fill_interior(Grid3<T>& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const Dims3 n = g.interior();
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) g.at(x, y, z) = static_cast<T>(d(rng));
}

Dims3 bench_grid(const BenchKernel& bk) {
  return bk.spec.dims == 2 ? Dims3{512, 512, 1} : Dims3{64, 64, 32};
}

void kernel_flat(benchmark::State& state, const BenchKernel& bk) {
  Grid3<float> in(bench_grid(bk), bk.spec.reach());
  fill_interior(in, 1);
  KernelOptions opt;
  opt.collect_trace = false;
  for (auto _ : state) {
    auto r = run_kernel(bk.spec, in, opt);
    benchmark::DoNotOptimize(r.out.data());
  }
  state.SetItemsProcessed(state.iterations() * bench_grid(bk).volume());
}

void kernel_brick(benchmark::State& state, const BenchKernel& bk) {
  const Dims3 halo = fit_halo(bench_grid(bk), bk.spec.reach(), default_brick(Precision::F32));
  Grid3<float> in(bench_grid(bk), halo);
  fill_interior(in, 1);
  KernelOptions opt;
  opt.collect_trace = false;
  opt.layout = Layout::Brick;
  for (auto _ : state) {
    auto r = run_kernel(bk.spec, in, opt);
    benchmark::DoNotOptimize(r.out.data());
  }
  state.SetItemsProcessed(state.iterations() * bench_grid(bk).volume());
}

void oracle_sweep(benchmark::State& state, const BenchKernel& bk) {
  Grid3<float> in(Dims3{32, 32, 16}, bk.spec.reach());
  fill_interior(in, 1);
  for (auto _ : state) {
    auto out = oracle_apply(bk.spec, in);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * Dims3{32, 32, 16}.volume());
}

void vti_step_bench(benchmark::State& state) {
  auto m = make_vti_model<float>(Dims3{32, 32, 16}, 4, 10.0, 10.0, 10.0, 1e-3);
  const Dims3 n = m.sh.interior();
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        m.vp.at(x, y, z) = 2500.0f;
        m.eps.at(x, y, z) = 0.2f;
        m.delta.at(x, y, z) = 0.1f;
      }
  fill_interior(m.sh, 2);
  fill_interior(m.sv, 3);
  m.dt = 0.5 * cfl_dt_limit(m.radius, vti_velocity_max(m), m.hx, m.hy, m.hz);
  for (auto _ : state) {
    vti_step(m);
    benchmark::DoNotOptimize(m.sh.data());
  }
  state.SetItemsProcessed(state.iterations() * n.volume());
}

void tti_step_bench(benchmark::State& state) {
  auto m = make_tti_model<float>(Dims3{32, 32, 16}, 4, 10.0, 10.0, 10.0, 1e-3);
  const Dims3 n = m.p.interior();
  const Dims3 h = m.p.halo();
  // alpha covers the halo: the auxiliary combines read one radius outward.
  for (std::int64_t z = -h.z; z < n.z + h.z; ++z)
    for (std::int64_t y = -h.y; y < n.y + h.y; ++y)
      for (std::int64_t x = -h.x; x < n.x + h.x; ++x) m.alpha.at(x, y, z) = 1.0f;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        m.vpx.at(x, y, z) = 2800.0f;
        m.vpz.at(x, y, z) = 2600.0f;
        m.vpn.at(x, y, z) = 2700.0f;
        m.vsz.at(x, y, z) = 1400.0f;
        m.theta.at(x, y, z) = 0.3f;
        m.phi.at(x, y, z) = 0.5f;
      }
  fill_interior(m.p, 4);
  fill_interior(m.q, 5);
  m.dt = 0.5 * cfl_dt_limit(m.radius, tti_velocity_max(m), m.hx, m.hy, m.hz);
  for (auto _ : state) {
    tti_step(m);
    benchmark::DoNotOptimize(m.p.data());
  }
  state.SetItemsProcessed(state.iterations() * n.volume());
}

void pipelined_exchange(benchmark::State& state) {
  const BenchKernel& bk = find_bench_kernel("3dstar_r2");
  Grid3<float> g(Dims3{32, 32, 32}, bk.spec.reach());
  fill_interior(g, 6);
  KernelOptions opt;
  opt.collect_trace = false;
  const Dims3 proc{2, 1, 1};
  const int layers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    std::vector<Grid3<float>> storage;
    auto domains = split_grid(g, proc, bk.spec.reach(), storage);
    SdmaEngine engine{SdmaEngine::Config{}};
    auto r = run_pipelined(bk.spec, domains, proc, layers, ExchangeMode::Sdma, engine, opt);
    benchmark::DoNotOptimize(r.out.data());
  }
  state.SetItemsProcessed(state.iterations() * g.interior().volume());
}

void stream_enumeration(benchmark::State& state, Layout layout) {
  const BenchKernel& bk = find_bench_kernel("3dstar_r4");
  const Dims3 halo =
      layout == Layout::Brick ? analysis_halo(bk, Precision::F32) : bk.spec.reach();
  for (auto _ : state) {
    auto n = count_streams(bk.spec, Dims3{16, 16, 4}, Dims3{16, 16, 4}, bk.analysis_tile,
                           halo, layout);
    benchmark::DoNotOptimize(n);
  }
}

void reuse_search(benchmark::State& state) {
  const MachineModel m;
  for (auto _ : state) {
    auto p = reuse_ratio_classic(Dims3{16, 4, 4}, 4, Precision::F32, m);
    benchmark::DoNotOptimize(p.ratio);
  }
}

const int registered = [] {
  for (const BenchKernel& bk : bench_suite()) {
    benchmark::RegisterBenchmark(("kernel_flat/" + bk.name).c_str(), kernel_flat, bk)
        ->Unit(benchmark::kMillisecond);
    if (bk.spec.dims == 3)
      benchmark::RegisterBenchmark(("kernel_brick/" + bk.name).c_str(), kernel_brick, bk)
          ->Unit(benchmark::kMillisecond);
  }
  benchmark::RegisterBenchmark("oracle/3dstar_r4", oracle_sweep,
                               find_bench_kernel("3dstar_r4"))
      ->Unit(benchmark::kMillisecond);
  benchmark::RegisterBenchmark("vti_step/32x32x16", vti_step_bench)
      ->Unit(benchmark::kMillisecond);
  benchmark::RegisterBenchmark("tti_step/32x32x16", tti_step_bench)
      ->Unit(benchmark::kMillisecond);
  benchmark::RegisterBenchmark("pipelined/32cube_px2", pipelined_exchange)
      ->Arg(1)
      ->Arg(4)
      ->Unit(benchmark::kMillisecond);
  benchmark::RegisterBenchmark("count_streams/flat", stream_enumeration, Layout::Flat);
  benchmark::RegisterBenchmark("count_streams/brick", stream_enumeration, Layout::Brick);
  benchmark::RegisterBenchmark("reuse_search/classic", reuse_search);
  return 0;
}();

}  // namespace

BENCHMARK_MAIN();
