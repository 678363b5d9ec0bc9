// Release acceptance suite. Each criterion prints one [PASS]/[FAIL] line;
// the exit code is the number of failed criteria. An optional argument
// selects a single criterion by number.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mmstencil/analysis.hpp"
#include "mmstencil/bench_suite.hpp"
#include "mmstencil/kernels.hpp"
#include "mmstencil/oracle.hpp"
#include "mmstencil/parallel.hpp"
#include "mmstencil/rtm.hpp"
#include "mmstencil/tile_engine.hpp"

using namespace mmstencil;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void line(int n, bool ok, const std::string& msg) {
  std::printf("[%s] %2d: %s\n", ok ? "PASS" : "FAIL", n, msg.c_str());
}

void note(const std::string& msg) { std::printf("          %s\n", msg.c_str()); }

template <typename T, typename Rng>
void fill_interior(Grid3<T>& g, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  const Dims3 n = g.interior();
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) g.at(x, y, z) = static_cast<T>(d(rng));
}

template <typename T>
double rel_normwise(const Grid3<T>& got, const Grid3<T>& want) {
  const Dims3 n = want.interior();
  double max_err = 0.0, max_ref = 0.0;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        max_err = std::max(max_err, std::abs(double(got.at(x, y, z)) -
                                             double(want.at(x, y, z))));
        max_ref = std::max(max_ref, std::abs(double(want.at(x, y, z))));
      }
  return max_err / std::max(max_ref, 1e-30);
}

template <typename T>
bool same_bits(const Grid3<T>& a, const Grid3<T>& b) {
  return a.same_shape(b) && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// 1. Every suite kernel reproduces the high-precision oracle on random
//    grids at the default emulation sizes, five seeds each.
bool criterion_1() {
  const double t0 = now_seconds();
  double worst = 0.0;
  std::string worst_at = "-";
  bool ok = true;
  for (const BenchKernel& bk : bench_suite()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Grid3<float> in(bk.default_grid, bk.spec.reach());
      std::mt19937_64 rng(seed * 1000003 + std::hash<std::string>{}(bk.name));
      fill_interior(in, rng);
      KernelOptions opt;
      opt.collect_trace = false;
      const KernelResult<float> res = run_kernel(bk.spec, in, opt);
      const Grid3<float> want = oracle_apply(bk.spec, in);
      const double err = rel_normwise(res.out, want);
      if (err > worst) {
        worst = err;
        worst_at = bk.name + " seed " + std::to_string(seed);
      }
      ok = ok && err <= 1e-5;
    }
  }
  const double dt = now_seconds() - t0;
  ok = ok && dt < 300.0;
  line(1, ok,
       fmt("stencil kernels match the high-precision oracle "
           "(worst rel err %.2e at %s, %.1fs)",
           worst, worst_at.c_str(), dt));
  return ok;
}

// 2. The matrix-path speedup closed form: exact values at radius 2 and 4,
//    strictly increasing with radius.
bool criterion_2() {
  const MachineModel m;
  const ExactRatio r4 = matrix_speedup(4, m);
  const ExactRatio r2 = matrix_speedup(2, m);
  bool ok = (r4.num == 3 && r4.den == 2) && (r2.num == r2.den);
  double prev = matrix_speedup(0, m).value();
  for (int r = 1; r <= 16; ++r) {
    const double v = matrix_speedup(r, m).value();
    ok = ok && v > prev;
    prev = v;
  }
  line(2, ok,
       fmt("matrix-path speedup closed form (r4 = %lld/%lld, r2 = %lld/%lld, "
           "strictly increasing through r = 16)",
           (long long)r4.num, (long long)r4.den, (long long)r2.num, (long long)r2.den));
  return ok;
}

// 3. Transposing a vector-length square through the staging tile costs
//    2*V_L slice ops, under the V_L*log2(V_L) lane permutations a pure
//    register scheme needs.
bool criterion_3() {
  const int vl = 16;
  TileEngine<float> e(vl, 4);
  std::vector<float> src(vl * vl), dst(vl * vl, -1.0f);
  for (int i = 0; i < vl * vl; ++i) src[std::size_t(i)] = float(i);
  e.clear_trace();
  e.transpose_block(src.data(), vl, dst.data(), vl);
  const std::size_t slices =
      e.trace().count(OpKind::SliceLoad) + e.trace().count(OpKind::SliceStore);
  bool correct = true;
  for (int i = 0; i < vl; ++i)
    for (int j = 0; j < vl; ++j)
      correct = correct && dst[std::size_t(j * vl + i)] == src[std::size_t(i * vl + j)];
  const std::size_t permutes = std::size_t(vl) * 4;  // vl * log2(vl)
  const bool ok = correct && slices == std::size_t(2 * vl) && slices < permutes;
  line(3, ok,
       fmt("tile transpose trace beats lane permutation (%zu slice ops vs %zu)",
           slices, permutes));
  return ok;
}

// 4. Outer products rotate across all four tiles: no two consecutive
//    outer products target the same tile in any 3D kernel's trace.
bool criterion_4() {
  bool ok = true;
  std::string detail;
  for (const BenchKernel& bk : bench_suite()) {
    if (bk.spec.dims != 3) continue;
    Grid3<float> in({32, 32, 8}, bk.spec.reach());
    std::mt19937_64 rng(17);
    fill_interior(in, rng);
    KernelOptions opt;
    opt.collect_trace = true;
    const KernelResult<float> res = run_kernel(bk.spec, in, opt);
    const InterleaveReport rep = check_interleaving(res.trace);
    const bool this_ok = rep.compliant && rep.max_same_tile_run == 1 &&
                         rep.active_tiles == 4 && rep.outer_products > 0;
    if (!this_ok && detail.empty())
      detail = fmt(" (%s: run %d, tiles %d)", bk.name.c_str(), rep.max_same_tile_run,
                   rep.active_tiles);
    ok = ok && this_ok;
  }
  line(4, ok,
       "outer products rotate across all four accumulator tiles in every 3D kernel" +
           detail);
  return ok;
}

// 5. Brick storage collapses the distinct-stream count of a 25-point star
//    block by at least 5x, with the flat count near the modeled 224 (226
//    when the two write streams at the block seams are merged).
bool criterion_5() {
  const BenchKernel& bk = find_bench_kernel("3dstar_r4");
  const Dims3 block{16, 16, 4};
  const Dims3 origin{16, 16, 4};
  const Dims3 interior = bk.analysis_tile;
  const std::int64_t flat = count_streams(bk.spec, origin, block, interior,
                                          bk.spec.reach(), Layout::Flat);
  const std::int64_t brick = count_streams(bk.spec, origin, block, interior,
                                           analysis_halo(bk, Precision::F32),
                                           Layout::Brick);
  const bool near = std::llabs(flat - 224) <= 2 || std::llabs(flat - 226) <= 2;
  const bool ok = near && brick > 0 && flat >= 5 * brick;
  line(5, ok,
       fmt("brick layout collapses the stream count (flat %lld, brick %lld, %.1fx)",
           (long long)flat, (long long)brick, double(flat) / double(brick)));
  return ok;
}

// 6. Cache-reuse objectives: the snoop-aware objective dominates the
//    classic one everywhere, and the classic optimum under the default
//    cache lands mid-window (around half reuse).
bool criterion_6() {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> hx(1, 32), hyz(1, 8), txp(0, 8), typ(0, 8);
  int held = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const Dims3 h{hx(rng), hyz(rng), hyz(rng)};
    const std::int64_t tx = std::int64_t(16) << txp(rng);
    const std::int64_t ty = std::int64_t(1) << typ(rng);
    const double classic = reuse_ratio_classic_at(h, tx, ty);
    const double snoop = reuse_ratio_snoop_at(h, tx);
    held += snoop + 1e-12 >= classic;
  }
  const bool dominance = held == trials;

  const MachineModel m;
  const ReusePoint best = reuse_ratio_classic({16, 4, 4}, 4, Precision::F32, m);
  const bool window = best.ratio >= 0.40 && best.ratio <= 0.60;
  const bool ok = dominance && window;
  line(6, ok,
       fmt("cache reuse: snoop objective >= classic on %d/%d draws; classic optimum "
           "(%lld,%lld) ratio %.4f %s [0.40, 0.60]",
           held, trials, (long long)best.tile_x, (long long)best.tile_y, best.ratio,
           window ? "inside" : "outside"));
  if (!window) {
    MachineModel small = m;
    small.llc_bytes = 256 * 1024;
    const ReusePoint alt = reuse_ratio_classic({16, 4, 4}, 4, Precision::F32, small);
    note(fmt("the checked window corresponds to a 256 KiB cache: optimum there is "
             "(%lld,%lld) ratio %.4f",
             (long long)alt.tile_x, (long long)alt.tile_y, alt.ratio));
    note(fmt("under the default %lld-byte cache the wide-tile optimum is the modeled "
             "behavior; the window check is kept as specified and fails honestly",
             (long long)m.llc_bytes));
  }
  return ok;
}

// 7. Snoop mode trims main-memory reads by the modeled margin for the four
//    deep-halo kernels, and read+neighbor line totals are conserved.
bool criterion_7() {
  const MachineModel m;
  const char* names[4] = {"3dstar_r2", "3dstar_r4", "3dbox_r1", "3dbox_r2"};
  const double expect[4] = {22.12, 21.81, 26.17, 26.17};
  bool ok = true;
  std::string detail;
  for (int i = 0; i < 4; ++i) {
    const BenchKernel& bk = find_bench_kernel(names[i]);
    const Dims3 halo_b = analysis_halo(bk, Precision::F32);
    TrafficOptions base_opt, snoop_opt;
    snoop_opt.snoop = true;
    const TrafficReport base =
        traffic_model(bk.spec, bk.analysis_tile, halo_b, Precision::F32, m, base_opt);
    const TrafficReport snp =
        traffic_model(bk.spec, bk.analysis_tile, halo_b, Precision::F32, m, snoop_opt);
    // Reduction is measured on total main-memory traffic, reads plus
    // writes, matching how the modeled percentages were derived.
    const double red = 100.0 *
                       double(base.total_mainmem_lines() - snp.total_mainmem_lines()) /
                       double(base.total_mainmem_lines());
    const bool conserved =
        base.mainmem_lines_read + base.neighbor_cache_lines ==
            snp.mainmem_lines_read + snp.neighbor_cache_lines &&
        base.mainmem_lines_written == snp.mainmem_lines_written;
    const bool this_ok = conserved && std::abs(red - expect[i]) <= 5.0;
    detail += fmt("%s%s %.2f%%", i ? ", " : "", names[i], red);
    ok = ok && this_ok;
  }
  line(7, ok, "snoop mode trims main-memory reads within the modeled band (" +
                  detail + ")");
  return ok;
}

// 8. Every 1/2-way decomposition of a 25-point star run reproduces the
//    single-domain result, and a 4-layer pipeline is bitwise identical to
//    the unpipelined exchange.
bool criterion_8() {
  const BenchKernel& bk = find_bench_kernel("3dstar_r4");
  const Dims3 halo = bk.spec.reach();
  Grid3<float> g({64, 64, 64}, halo);
  std::mt19937_64 rng(7);
  fill_interior(g, rng);
  KernelOptions opt;
  opt.collect_trace = false;
  const Grid3<float> ref = run_kernel(bk.spec, g, opt).out;

  bool ok = true;
  double worst = 0.0;
  for (int px = 1; px <= 2; ++px)
    for (int py = 1; py <= 2; ++py)
      for (int pz = 1; pz <= 2; ++pz) {
        const Dims3 proc{px, py, pz};
        const Dims3 dn{64 / px, 64 / py, 64 / pz};

        std::vector<Grid3<float>> sa;
        auto da = split_grid(g, proc, halo, sa);
        SdmaEngine ea;
        const auto r4 = run_pipelined(bk.spec, da, proc, 4, ExchangeMode::Sdma, ea, opt);

        std::vector<Grid3<float>> sb;
        auto db = split_grid(g, proc, halo, sb);
        SdmaEngine eb;
        const auto r1 = run_pipelined(bk.spec, db, proc, 1, ExchangeMode::Sdma, eb, opt);

        ok = ok && check_pipeline_schedule(r4.schedule).ok;
        for (std::size_t d = 0; d < da.size(); ++d) {
          const Dims3 c = da[d].coords;
          Grid3<float> sub(dn, {0, 0, 0});
          for (std::int64_t z = 0; z < dn.z; ++z)
            for (std::int64_t y = 0; y < dn.y; ++y)
              for (std::int64_t x = 0; x < dn.x; ++x)
                sub.at(x, y, z) = ref.at(c.x * dn.x + x, c.y * dn.y + y, c.z * dn.z + z);
          Grid3<float> got(dn, {0, 0, 0});
          for (std::int64_t z = 0; z < dn.z; ++z)
            for (std::int64_t y = 0; y < dn.y; ++y)
              for (std::int64_t x = 0; x < dn.x; ++x)
                got.at(x, y, z) = r4.out[d].at(x, y, z);
          worst = std::max(worst, rel_normwise(got, sub));
          ok = ok && rel_normwise(got, sub) <= 1e-5;
          ok = ok && same_bits(r4.out[d], r1.out[d]);
        }
      }
  line(8, ok,
       fmt("decomposed and pipelined runs reproduce the single-domain result "
           "(8 layouts, worst rel err %.2e, 4-layer == 1-layer bitwise)",
           worst));
  return ok;
}

// 9. A thousand runs with randomized transfer latencies never violate the
//    pipeline ordering rules and never change the computed values.
bool criterion_9() {
  const BenchKernel& bk = find_bench_kernel("3dstar_r4");
  const Dims3 halo = bk.spec.reach();
  Grid3<float> g({32, 32, 32}, halo);
  std::mt19937_64 rng(99);
  fill_interior(g, rng);
  KernelOptions opt;
  opt.collect_trace = false;
  const Grid3<float> ref = run_kernel(bk.spec, g, opt).out;

  const Dims3 procs[4] = {{2, 1, 2}, {1, 2, 2}, {2, 2, 1}, {2, 2, 2}};
  int violations = 0, mismatches = 0;
  const int runs = 1000;
  for (int run = 0; run < runs; ++run) {
    const Dims3 proc = procs[run % 4];
    const int layers = (run % 2) ? 2 : 4;
    SdmaEngine::Config cfg;
    cfg.seed = std::uint64_t(run) + 1;
    cfg.max_delay_us = 1 + run % 30;
    SdmaEngine engine(cfg);
    std::vector<Grid3<float>> storage;
    auto domains = split_grid(g, proc, halo, storage);
    const auto res = run_pipelined(bk.spec, domains, proc, layers,
                                   ExchangeMode::Sdma, engine, opt);
    const ScheduleCheck chk = check_pipeline_schedule(res.schedule);
    violations += !chk.ok;
    const Dims3 dn{32 / proc.x, 32 / proc.y, 32 / proc.z};
    for (std::size_t d = 0; d < domains.size(); ++d) {
      const Dims3 c = domains[d].coords;
      for (std::int64_t z = 0; z < dn.z && !mismatches; ++z)
        for (std::int64_t y = 0; y < dn.y; ++y)
          for (std::int64_t x = 0; x < dn.x; ++x)
            if (res.out[d].at(x, y, z) !=
                ref.at(c.x * dn.x + x, c.y * dn.y + y, c.z * dn.z + z)) {
              ++mismatches;
              break;
            }
    }
  }
  const bool ok = violations == 0 && mismatches == 0;
  line(9, ok,
       fmt("randomized transfer latencies: %d/%d runs kept pipeline ordering and "
           "exact values",
           runs - violations - mismatches, runs));
  return ok;
}

// 10. Wave-propagation kernels match naive references, preserve isotropic
//     symmetry bitwise, reduce correctly at zero tilt, and stay bounded
//     over a driven 100-step run.
bool criterion_10() {
  const double t0 = now_seconds();
  bool ok = true;
  std::string fails;

  {  // engine vs naive reference, both media
    VtiModel<float> a = make_vti_model<float>({64, 64, 64}, 4, 10, 10, 10, 0.0);
    std::mt19937_64 rng(21);
    fill_interior(a.sh, rng);
    fill_interior(a.sh_prev, rng, -0.1, 0.1);
    fill_interior(a.sv, rng);
    fill_interior(a.sv_prev, rng, -0.1, 0.1);
    fill_interior(a.vp, rng, 2000.0, 4000.0);
    fill_interior(a.eps, rng, 0.0, 0.3);
    fill_interior(a.delta, rng, 0.0, 0.2);
    a.dt = 0.8 * cfl_dt_limit(4, vti_velocity_max(a), 10, 10, 10);
    VtiModel<float> b = a;
    vti_step(a);
    vti_step_reference(b);
    const double e1 = std::max(rel_normwise(a.sh, b.sh), rel_normwise(a.sv, b.sv));
    if (e1 > 1e-5) fails += fmt(" vti err %.2e;", e1);
    ok = ok && e1 <= 1e-5;
  }
  {
    TtiModel<float> a = make_tti_model<float>({64, 64, 64}, 4, 10, 10, 10, 0.0);
    std::mt19937_64 rng(22);
    fill_interior(a.p, rng);
    fill_interior(a.p_prev, rng, -0.1, 0.1);
    fill_interior(a.q, rng);
    fill_interior(a.q_prev, rng, -0.1, 0.1);
    fill_interior(a.vpx, rng, 2500.0, 3500.0);
    fill_interior(a.vpz, rng, 2300.0, 3200.0);
    fill_interior(a.vpn, rng, 2400.0, 3300.0);
    fill_interior(a.vsz, rng, 1000.0, 1800.0);
    fill_interior(a.alpha, rng, 0.8, 1.2);
    fill_interior(a.theta, rng, -0.6, 0.6);
    fill_interior(a.phi, rng, -3.0, 3.0);
    a.dt = 0.8 * cfl_dt_limit(4, tti_velocity_max(a), 10, 10, 10);
    TtiModel<float> b = a;
    tti_step(a);
    tti_step_reference(b);
    const double e2 = std::max(rel_normwise(a.p, b.p), rel_normwise(a.q, b.q));
    if (e2 > 1e-5) fails += fmt(" tti err %.2e;", e2);
    ok = ok && e2 <= 1e-5;
  }
  {  // isotropic symmetry, bitwise
    VtiModel<float> m = make_vti_model<float>({64, 64, 64}, 4, 10, 10, 10, 0.0);
    std::mt19937_64 rng(23);
    fill_interior(m.sh, rng);
    m.sv = m.sh;
    fill_interior(m.sh_prev, rng, -0.1, 0.1);
    m.sv_prev = m.sh_prev;
    fill_interior(m.vp, rng, 2000.0, 4000.0);
    m.dt = 0.8 * cfl_dt_limit(4, vti_velocity_max(m), 10, 10, 10);
    for (int s = 0; s < 5; ++s) vti_step(m);
    if (!same_bits(m.sh, m.sv)) fails += " isotropy;";
    ok = ok && same_bits(m.sh, m.sv);
  }
  {  // zero tilt reduces to the axis-aligned operator
    const int r = 4;
    TtiModel<float> m = make_tti_model<float>({64, 64, 64}, r, 1, 1, 1, 1e-4);
    std::mt19937_64 rng(24);
    fill_interior(m.p, rng);
    fill_interior(m.p_prev, rng, -0.1, 0.1);
    fill_interior(m.q, rng);
    fill_interior(m.q_prev, rng, -0.1, 0.1);
    fill_interior(m.vpx, rng, 2500.0, 3500.0);
    fill_interior(m.vpz, rng, 2300.0, 3200.0);
    fill_interior(m.vpn, rng, 2400.0, 3300.0);
    fill_interior(m.vsz, rng, 1000.0, 1800.0);
    fill_interior(m.alpha, rng, 0.8, 1.2);
    fill_interior(m.phi, rng, -3.0, 3.0);
    const TtiModel<float> pre = m;
    TtiAux<float> aux{Grid3<float>(m.p.interior(), m.p.halo()),
                      Grid3<float>(m.p.interior(), m.p.halo())};
    tti_update_aux(m, aux, -r, m.p.interior().z + r);
    tti_step(m);

    const CoefficientTable c2 = generate_fd_coefficients(r, Derivative::Second, 1.0);
    auto pad = [&](const Grid3<float>& g, std::int64_t x, std::int64_t y,
                   std::int64_t z) {
      const Dims3 n = g.interior(), h = g.halo();
      if (x < -h.x || x >= n.x + h.x || y < -h.y || y >= n.y + h.y || z < -h.z ||
          z >= n.z + h.z)
        return 0.0;
      return double(g.at(x, y, z));
    };
    const Dims3 n = pre.p.interior();
    double worst = 0.0, scale = 0.0;
    for (std::int64_t z = 0; z < n.z; ++z)
      for (std::int64_t y = 0; y < n.y; ++y)
        for (std::int64_t x = 0; x < n.x; ++x) {
          double hxx_p = 0, hyy_p = 0, hzz_q = 0, hzz_r1 = 0, hxx_r2 = 0, hyy_r2 = 0;
          for (int k = -r; k <= r; ++k) {
            const double c = c2.value_at(k);
            hxx_p += c * pad(pre.p, x + k, y, z);
            hyy_p += c * pad(pre.p, x, y + k, z);
            hzz_q += c * pad(pre.q, x, y, z + k);
            hzz_r1 += c * pad(aux.r1, x, y, z + k);
            hxx_r2 += c * pad(aux.r2, x + k, y, z);
            hyy_r2 += c * pad(aux.r2, x, y + k, z);
          }
          const double al = double(pre.alpha.at(x, y, z));
          const double h2p = hxx_p + hyy_p;
          const double vpx2 = double(pre.vpx.at(x, y, z)) * double(pre.vpx.at(x, y, z));
          const double vpz2 = double(pre.vpz.at(x, y, z)) * double(pre.vpz.at(x, y, z));
          const double vpn2 = double(pre.vpn.at(x, y, z)) * double(pre.vpn.at(x, y, z));
          const double vsz2 = double(pre.vsz.at(x, y, z)) * double(pre.vsz.at(x, y, z));
          const double dt2 = pre.dt * pre.dt;
          const double p_next = 2.0 * pad(pre.p, x, y, z) - pad(pre.p_prev, x, y, z) +
                                dt2 * (vpx2 * h2p + al * vpz2 * hzz_q + vsz2 * hzz_r1);
          const double q_next =
              2.0 * pad(pre.q, x, y, z) - pad(pre.q_prev, x, y, z) +
              dt2 * (vpn2 / al * h2p + vpz2 * hzz_q - vsz2 * (hxx_r2 + hyy_r2));
          worst = std::max({worst, std::abs(double(m.p.at(x, y, z)) - p_next),
                            std::abs(double(m.q.at(x, y, z)) - q_next)});
          scale = std::max({scale, std::abs(p_next), std::abs(q_next)});
        }
    const double rel = worst / std::max(scale, 1e-30);
    if (rel > 1e-5) fails += fmt(" zero-tilt err %.2e;", rel);
    ok = ok && rel <= 1e-5;
  }
  double max_abs = 0.0;
  {  // driven stability
    RtmConfig cfg;
    cfg.grid = {64, 64, 64};
    cfg.source_enabled = true;
    cfg.sponge_width = 8;
    VtiModel<float> m = build_vti_model<float>(cfg);
    SimOptions opt;
    opt.source_enabled = true;
    opt.source = cfg.source;
    opt.sponge_width = cfg.sponge_width;
    const RtmRunReport rep = run_simulation(m, 100, DecompositionPlan{}, opt);
    max_abs = rep.max_abs_field;
    const bool bounded = std::isfinite(max_abs) && max_abs > 0.0 && max_abs < 10.0;
    if (!bounded) fails += fmt(" unbounded %.3g;", max_abs);
    ok = ok && bounded;
  }
  const double dt = now_seconds() - t0;
  ok = ok && dt < 600.0;
  line(10, ok,
       fmt("wave kernels match naive references and stay bounded "
           "(100-step peak %.3g, %.1fs)%s",
           max_abs, dt, fails.c_str()));
  return ok;
}

// 11. Roofline classification matches the expected class for all kernels.
bool criterion_11() {
  const MachineModel m;
  int matched = 0, total = 0;
  std::string detail;
  for (const BenchKernel& bk : bench_suite()) {
    const RooflineResult r = roofline_classify(bk.spec, bk.analysis_tile,
                                               analysis_halo(bk, Precision::F32),
                                               Precision::F32, m);
    ++total;
    if (r.cls == bk.expected_class) {
      ++matched;
    } else if (detail.empty()) {
      detail = fmt(" (%s got %s, expected %s)", bk.name.c_str(), to_string(r.cls),
                   to_string(bk.expected_class));
    }
  }
  const bool ok = matched == total;
  line(11, ok,
       fmt("roofline classes match expectations (%d/%d kernels)%s", matched, total,
           detail.c_str()));
  return ok;
}

// 12. Halving the grid spacing (doubling points per wavelength) multiplies
//     the required points by ~8.
bool criterion_12() {
  const double a1 = wave_grid_points(1000, 1000, 1000, 10, 2000, 10);
  const double a2 = wave_grid_points(1000, 1000, 1000, 10, 2000, 20);
  const double b1 = wave_grid_points(4000, 3000, 2000, 15, 1500, 7);
  const double b2 = wave_grid_points(4000, 3000, 2000, 15, 1500, 14);
  const double ra = a2 / a1, rb = b2 / b1;
  const bool ok = ra >= 7.8 && ra <= 8.2 && rb >= 7.8 && rb <= 8.2;
  line(12, ok,
       fmt("halving grid spacing costs eight times the points (ratios %.3f, %.3f)",
           ra, rb));
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;
  bool (*criteria[12])() = {criterion_1, criterion_2, criterion_3,  criterion_4,
                            criterion_5, criterion_6, criterion_7,  criterion_8,
                            criterion_9, criterion_10, criterion_11, criterion_12};
  if (only < 0 || only > 12) {
    std::fprintf(stderr, "usage: %s [criterion 1..12]\n", argv[0]);
    return 64;
  }
  int failures = 0;
  for (int i = 1; i <= 12; ++i) {
    if (only && i != only) continue;
    bool ok = false;
    try {
      ok = criteria[i - 1]();
    } catch (const std::exception& e) {
      line(i, false, std::string("threw: ") + e.what());
    }
    failures += !ok;
  }
  if (!only) std::printf("%d of 12 criteria passed\n", 12 - failures);
  return failures;
}
