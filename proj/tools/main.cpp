// mmstencil command-line tool: emulated kernel benchmarks, oracle
// verification, analytic model queries, and wave-propagation runs.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mmstencil/analysis.hpp"
#include "mmstencil/bench_suite.hpp"
#include "mmstencil/grid_io.hpp"
#include "mmstencil/kernels.hpp"
#include "mmstencil/oracle.hpp"
#include "mmstencil/parallel.hpp"
#include "mmstencil/rtm.hpp"

namespace ms = mmstencil;

namespace {

ms::Precision parse_precision(const std::string& s) {
  if (s == "f32") return ms::Precision::F32;
  if (s == "f64") return ms::Precision::F64;
  throw ms::ConfigError("precision must be f32 or f64");
}

ms::Layout parse_layout(const std::string& s) {
  if (s == "flat") return ms::Layout::Flat;
  if (s == "brick") return ms::Layout::Brick;
  throw ms::ConfigError("layout must be flat or brick");
}

ms::XPassMode parse_xpass(const std::string& s) {
  if (s == "transposed") return ms::XPassMode::Transposed;
  if (s == "gather") return ms::XPassMode::Gather;
  throw ms::ConfigError("x-pass must be transposed or gather");
}

ms::ExchangeMode parse_mode(const std::string& s) {
  if (s == "sdma") return ms::ExchangeMode::Sdma;
  if (s == "message") return ms::ExchangeMode::Message;
  throw ms::ConfigError("mode must be sdma or message");
}

// --machine beats MMSTENCIL_MACHINE beats built-in defaults.
ms::MachineModel resolve_machine(const std::string& flag) {
  if (!flag.empty()) return ms::load_machine(flag);
  if (const char* env = std::getenv("MMSTENCIL_MACHINE"); env && *env)
    return ms::load_machine(env);
  return ms::MachineModel{};
}

ms::Dims3 dims_from_flag(const std::vector<std::int64_t>& v, const char* what) {
  if (v.size() != 3) throw ms::ConfigError(std::string(what) + " needs three values");
  return ms::Dims3{v[0], v[1], v[2]};
}

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ms::ConfigError("cannot open output file '" + path + "'");
  os << text;
  if (!text.empty() && text.back() != '\n') os << '\n';
}

template <typename T>
ms::Grid3<T> make_input(ms::Dims3 interior, ms::Dims3 halo, std::uint64_t seed) {
  ms::Grid3<T> g(interior, halo);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (std::int64_t z = 0; z < interior.z; ++z)
    for (std::int64_t y = 0; y < interior.y; ++y)
      for (std::int64_t x = 0; x < interior.x; ++x)
        g.at(x, y, z) = static_cast<T>(dist(rng));
  return g;
}

struct VerifyOutcome {
  bool ran = false;
  bool ok = true;
  double max_error = 0.0;
  double tolerance = 0.0;
};

template <typename T>
VerifyOutcome verify_against_oracle(const ms::StencilSpec& spec, const ms::Grid3<T>& in,
                                    const ms::Grid3<T>& out) {
  const ms::Grid3<T> ref = ms::oracle_apply(spec, in);
  const ms::Dims3 n = in.interior();
  double max_err = 0.0, max_ref = 0.0;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) {
        max_err = std::max(max_err, std::abs(static_cast<double>(out.at(x, y, z)) -
                                             static_cast<double>(ref.at(x, y, z))));
        max_ref = std::max(max_ref, std::abs(static_cast<double>(ref.at(x, y, z))));
      }
  VerifyOutcome v;
  v.ran = true;
  const double rtol = sizeof(T) == 4 ? 1e-5 : 1e-12;
  v.tolerance = std::max(rtol * max_ref, 1e-30);
  v.max_error = max_err;
  v.ok = max_err <= v.tolerance;
  return v;
}

struct BenchFlags {
  std::string kernel = "all";
  std::vector<std::int64_t> grid;
  std::string precision = "f32";
  std::string layout = "flat";
  int workers = 1;
  bool snoop = false;
  std::uint64_t seed = 1;
  int reps = 1;
  bool prefetch = false;
  std::string x_pass = "transposed";
  std::string machine;
  bool verify = false;
  std::string timing = "on";
  bool inject_error = false;
  std::string output;
  std::string format = "json";
};

struct BenchRow {
  std::string kernel;
  ms::Dims3 grid{0, 0, 0};
  std::string precision;
  std::string layout;
  int workers = 1;
  bool snoop = false;
  std::uint64_t seed = 0;
  int reps = 1;
  bool prefetch = false;
  std::string x_pass;
  std::int64_t blocks = 0;
  ms::TrafficReport traffic;
  double wall_seconds = 0.0;
  double points_per_second = 0.0;
  double utilization = 0.0;
  VerifyOutcome verify;
};

template <typename T>
BenchRow run_bench_one(const ms::BenchKernel& bk, const BenchFlags& f,
                       const ms::MachineModel& m) {
  const ms::Dims3 interior =
      f.grid.empty() ? bk.default_grid : dims_from_flag(f.grid, "--grid");
  const ms::Layout layout = parse_layout(f.layout);
  // Brick storage needs whole bricks; pad the halo out from the reach.
  const ms::Dims3 halo =
      layout == ms::Layout::Brick
          ? ms::fit_halo(interior, bk.spec.reach(),
                         ms::default_brick(sizeof(T) == 4 ? ms::Precision::F32
                                                          : ms::Precision::F64))
          : bk.spec.reach();
  const ms::Grid3<T> in = make_input<T>(interior, halo, f.seed);

  ms::KernelOptions opt;
  opt.layout = layout;
  opt.prefetch = f.prefetch;
  opt.x_pass = parse_xpass(f.x_pass);
  opt.collect_trace = false;

  BenchRow row;
  row.kernel = bk.name;
  row.grid = interior;
  row.precision = f.precision;
  row.layout = f.layout;
  row.workers = f.workers;
  row.snoop = f.snoop;
  row.seed = f.seed;
  row.reps = f.reps;
  row.prefetch = f.prefetch;
  row.x_pass = f.x_pass;

  ms::Grid3<T> out;
  double best = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < std::max(1, f.reps); ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    if (f.workers <= 1) {
      auto res = ms::run_kernel(bk.spec, in, opt);
      row.blocks = res.blocks_processed;
      row.traffic = res.traffic;
      out = std::move(res.out);
    } else {
      const auto plan = ms::plan_workers(interior, f.workers, f.snoop,
                                         parse_precision(f.precision), m);
      auto res = ms::execute_parallel(bk.spec, in, plan, opt, m);
      row.blocks = 0;
      for (auto b : res.blocks_per_worker) row.blocks += b;
      row.traffic = res.traffic;
      out = std::move(res.out);
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, wall);
  }
  row.wall_seconds = best;
  row.points_per_second =
      best > 0.0 ? static_cast<double>(interior.volume()) / best : 0.0;
  row.utilization = ms::bandwidth_utilization(row.points_per_second / 1e9,
                                              parse_precision(f.precision), m);

  if (f.inject_error)
    out.at(interior.x / 2, interior.y / 2, interior.z / 2) += static_cast<T>(1.0);
  if (f.verify || f.inject_error) row.verify = verify_against_oracle(bk.spec, in, out);
  return row;
}

nlohmann::json traffic_to_json(const ms::TrafficReport& t) {
  nlohmann::json j;
  j["mainmem_lines_read"] = t.mainmem_lines_read;
  j["mainmem_lines_written"] = t.mainmem_lines_written;
  j["neighbor_cache_lines"] = t.neighbor_cache_lines;
  j["distinct_streams"] = t.distinct_streams;
  j["prefetch_ops"] = t.prefetch_ops;
  j["redundant_line_fraction"] = t.redundant_line_fraction;
  return j;
}

nlohmann::json bench_row_json(const BenchRow& r, bool timing) {
  nlohmann::json j;
  nlohmann::json cfg;
  cfg["kernel"] = r.kernel;
  cfg["grid"] = {r.grid.x, r.grid.y, r.grid.z};
  cfg["precision"] = r.precision;
  cfg["layout"] = r.layout;
  cfg["workers"] = r.workers;
  cfg["snoop"] = r.snoop;
  cfg["seed"] = r.seed;
  cfg["reps"] = r.reps;
  cfg["prefetch"] = r.prefetch;
  cfg["x_pass"] = r.x_pass;
  j["config"] = cfg;
  nlohmann::json res;
  res["blocks"] = r.blocks;
  res["traffic"] = traffic_to_json(r.traffic);
  if (timing) {
    res["emulated_wall_seconds"] = r.wall_seconds;
    res["emulated_points_per_second"] = r.points_per_second;
    res["modeled_bandwidth_utilization"] = r.utilization;
  }
  if (r.verify.ran) {
    res["verified"] = r.verify.ok;
    res["max_error"] = r.verify.max_error;
    res["tolerance"] = r.verify.tolerance;
  }
  j["result"] = res;
  return j;
}

std::string bench_rows_csv(const std::vector<BenchRow>& rows, bool timing) {
  std::ostringstream os;
  os << "# mmstencil-bench-csv v1\n";
  os << "kernel,precision,layout,workers,snoop,grid_x,grid_y,grid_z,seed,reps,prefetch,"
        "x_pass,blocks,lines_read,lines_written,neighbor_lines,streams,"
        "redundant_fraction,verified,max_error,wall_seconds,points_per_second,"
        "utilization\n";
  for (const auto& r : rows) {
    os << r.kernel << ',' << r.precision << ',' << r.layout << ',' << r.workers << ','
       << (r.snoop ? 1 : 0) << ',' << r.grid.x << ',' << r.grid.y << ',' << r.grid.z
       << ',' << r.seed << ',' << r.reps << ',' << (r.prefetch ? 1 : 0) << ','
       << r.x_pass << ',' << r.blocks << ',' << r.traffic.mainmem_lines_read << ','
       << r.traffic.mainmem_lines_written << ',' << r.traffic.neighbor_cache_lines
       << ',' << r.traffic.distinct_streams << ',' << r.traffic.redundant_line_fraction
       << ',';
    if (r.verify.ran)
      os << (r.verify.ok ? "ok" : "fail") << ',' << r.verify.max_error;
    else
      os << ",";
    os << ',';
    if (timing)
      os << r.wall_seconds << ',' << r.points_per_second << ',' << r.utilization;
    else
      os << ",,";
    os << '\n';
  }
  return os.str();
}

std::vector<const ms::BenchKernel*> select_kernels(const std::string& name) {
  std::vector<const ms::BenchKernel*> ks;
  if (name == "all") {
    for (const auto& k : ms::bench_suite()) ks.push_back(&k);
  } else {
    ks.push_back(&ms::find_bench_kernel(name));
  }
  return ks;
}

int run_bench(const BenchFlags& f, bool verify_only) {
  const ms::MachineModel m = resolve_machine(f.machine);
  const ms::Precision pr = parse_precision(f.precision);
  const bool timing = f.timing == "on";
  std::vector<BenchRow> rows;
  for (const ms::BenchKernel* bk : select_kernels(f.kernel)) {
    if (pr == ms::Precision::F32)
      rows.push_back(run_bench_one<float>(*bk, f, m));
    else
      rows.push_back(run_bench_one<double>(*bk, f, m));
  }

  bool all_ok = true;
  for (const auto& r : rows)
    if (r.verify.ran && !r.verify.ok) all_ok = false;

  if (verify_only) {
    std::ostringstream os;
    for (const auto& r : rows)
      os << "kernel " << r.kernel << ": " << (r.verify.ok ? "OK" : "FAIL")
         << " (max_error=" << r.verify.max_error << ", tolerance=" << r.verify.tolerance
         << ")\n";
    write_output(os.str(), f.output);
    return all_ok ? 0 : 1;
  }

  std::string text;
  if (f.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back(bench_row_json(r, timing));
    text = j.dump(2);
  } else if (f.format == "csv") {
    text = bench_rows_csv(rows, timing);
  } else {
    throw ms::ConfigError("format must be json or csv");
  }
  write_output(text, f.output);
  return all_ok ? 0 : 1;
}

struct AnalyzeFlags {
  std::string kernel = "all";
  std::string precision = "f32";
  std::string machine;
  std::vector<std::int64_t> tile;
  std::vector<double> wave;
  std::string output;
  std::string format = "json";
};

nlohmann::json analyze_kernel_json(const ms::BenchKernel& bk, ms::Precision pr,
                                   const ms::MachineModel& m,
                                   const std::vector<std::int64_t>& tile_flag) {
  nlohmann::json j;
  j["kernel"] = bk.name;
  j["pattern"] = ms::to_string(bk.spec.pattern);
  j["radius"] = bk.spec.radius;
  j["dims"] = bk.spec.dims;

  const ms::ExactRatio sp = ms::matrix_speedup(bk.spec.radius, m);
  j["matrix_speedup"] = {{"num", sp.num}, {"den", sp.den}, {"value", sp.value()}};

  ms::Dims3 tile = bk.analysis_tile;
  if (!tile_flag.empty()) {
    if (tile_flag.size() != 2) throw ms::ConfigError("--tile needs two values (x,y)");
    tile.x = tile_flag[0];
    tile.y = tile_flag[1];
  }
  const ms::Dims3 halo_b = ms::analysis_halo(bk, pr);
  j["analysis_tile"] = {tile.x, tile.y, tile.z};

  const ms::RooflineResult rf = ms::roofline_classify(bk.spec, tile, halo_b, pr, m);
  j["roofline"] = {{"arithmetic_intensity", rf.arithmetic_intensity},
                   {"machine_balance", rf.machine_balance},
                   {"class", ms::to_string(rf.cls)}};

  const ms::TrafficReport tr = ms::traffic_model(bk.spec, tile, halo_b, pr, m);
  j["traffic"] = traffic_to_json(tr);

  // Stream counts for one interior compute block in both layouts.
  const int vl = ms::default_vector_length(pr);
  const std::int64_t bz = bk.spec.dims == 2 ? 1 : ms::default_block_z(pr);
  const ms::Dims3 block{vl, vl, bz};
  const ms::Dims3 interior = bk.default_grid;
  ms::Dims3 origin{0, 0, 0};
  for (int a = 0; a < 3; ++a)
    if (interior[a] >= 2 * block[a]) origin[a] = block[a];
  ms::Dims3 brick = ms::default_brick(pr);
  if (interior.z == 1) brick.z = 1;
  j["streams_flat"] = ms::count_streams(bk.spec, origin, block, interior,
                                        bk.spec.reach(), ms::Layout::Flat, brick);
  // Brick storage pads the halo out to whole bricks per face.
  j["streams_brick"] = ms::count_streams(bk.spec, origin, block, interior, halo_b,
                                         ms::Layout::Brick, brick);

  const std::int64_t vz = ms::default_block_z(pr);
  try {
    const ms::ReusePoint c = ms::reuse_ratio_classic(halo_b, vz, pr, m);
    j["reuse_classic"] = {{"tile_x", c.tile_x}, {"tile_y", c.tile_y}, {"ratio", c.ratio}};
  } catch (const ms::InfeasibleError& e) {
    j["reuse_classic"] = {{"infeasible", e.what()}};
  }
  try {
    const ms::ReusePoint s = ms::reuse_ratio_snoop(halo_b, vz, pr, m);
    j["reuse_snoop"] = {{"tile_x", s.tile_x}, {"tile_y", s.tile_y}, {"ratio", s.ratio}};
  } catch (const ms::InfeasibleError& e) {
    j["reuse_snoop"] = {{"infeasible", e.what()}};
  }
  return j;
}

int run_analyze(const AnalyzeFlags& f) {
  const ms::MachineModel m = resolve_machine(f.machine);
  const ms::Precision pr = parse_precision(f.precision);
  nlohmann::json out;
  nlohmann::json arr = nlohmann::json::array();
  for (const ms::BenchKernel* bk : select_kernels(f.kernel))
    arr.push_back(analyze_kernel_json(*bk, pr, m, f.tile));
  out["kernels"] = arr;
  out["machine"] = nlohmann::json::parse(ms::machine_to_json(m));
  if (!f.wave.empty()) {
    if (f.wave.size() != 6)
      throw ms::ConfigError("--wave needs six values: dx,dy,dz,f0,vmin,ppw");
    out["wave_grid_points"] = ms::wave_grid_points(f.wave[0], f.wave[1], f.wave[2],
                                                   f.wave[3], f.wave[4], f.wave[5]);
  }

  std::string text;
  if (f.format == "json") {
    text = out.dump(2);
  } else if (f.format == "csv") {
    std::ostringstream os;
    os << "# mmstencil-analyze-csv v1\n";
    os << "kernel,pattern,radius,dims,speedup_num,speedup_den,speedup,ai,balance,class,"
          "streams_flat,streams_brick,reuse_classic_x,reuse_classic_y,reuse_classic,"
          "reuse_snoop_x,reuse_snoop_y,reuse_snoop\n";
    for (const auto& k : arr) {
      os << k["kernel"].get<std::string>() << ',' << k["pattern"].get<std::string>()
         << ',' << k["radius"].get<int>() << ',' << k["dims"].get<int>() << ','
         << k["matrix_speedup"]["num"].get<std::int64_t>() << ','
         << k["matrix_speedup"]["den"].get<std::int64_t>() << ','
         << k["matrix_speedup"]["value"].get<double>() << ','
         << k["roofline"]["arithmetic_intensity"].get<double>() << ','
         << k["roofline"]["machine_balance"].get<double>() << ','
         << k["roofline"]["class"].get<std::string>() << ','
         << k["streams_flat"].get<std::int64_t>() << ','
         << k["streams_brick"].get<std::int64_t>() << ',';
      if (k["reuse_classic"].contains("ratio"))
        os << k["reuse_classic"]["tile_x"].get<std::int64_t>() << ','
           << k["reuse_classic"]["tile_y"].get<std::int64_t>() << ','
           << k["reuse_classic"]["ratio"].get<double>() << ',';
      else
        os << ",,,";
      if (k["reuse_snoop"].contains("ratio"))
        os << k["reuse_snoop"]["tile_x"].get<std::int64_t>() << ','
           << k["reuse_snoop"]["tile_y"].get<std::int64_t>() << ','
           << k["reuse_snoop"]["ratio"].get<double>();
      else
        os << ",,";
      os << '\n';
    }
    text = os.str();
  } else {
    throw ms::ConfigError("format must be json or csv");
  }
  write_output(text, f.output);
  return 0;
}

struct RtmFlags {
  std::string config;
  int steps = -1;  // <0: take from config
  std::vector<std::int64_t> decomp;
  int pipeline_layers = 0;  // 0: take from config
  std::string mode;
  std::string timing = "on";
  std::string output;
  std::string write_fields;
};

template <typename T>
nlohmann::json run_rtm_typed(const ms::RtmConfig& cfg, const RtmFlags& f) {
  ms::SimOptions so;
  so.source_enabled = cfg.source_enabled;
  so.source = cfg.source;
  so.sponge_width = cfg.sponge_width;
  so.sponge_alpha = cfg.sponge_alpha;
  const int steps = cfg.steps;  // overrides already folded in by the caller
  nlohmann::json rep;
  if (cfg.medium == "vti") {
    ms::VtiModel<T> m = ms::build_vti_model<T>(cfg);
    rep = nlohmann::json::parse(
        ms::report_to_json(ms::run_simulation(m, steps, cfg.decomp, so)));
    if (!f.write_fields.empty()) {
      ms::write_grid(m.sh, f.write_fields + "_sh.mmsg");
      ms::write_grid(m.sv, f.write_fields + "_sv.mmsg");
    }
  } else {
    ms::TtiModel<T> m = ms::build_tti_model<T>(cfg);
    rep = nlohmann::json::parse(
        ms::report_to_json(ms::run_simulation(m, steps, cfg.decomp, so)));
    if (!f.write_fields.empty()) {
      ms::write_grid(m.p, f.write_fields + "_p.mmsg");
      ms::write_grid(m.q, f.write_fields + "_q.mmsg");
    }
  }
  return rep;
}

int run_rtm(const RtmFlags& f) {
  std::ifstream is(f.config, std::ios::binary);
  if (!is) throw ms::ConfigError("cannot open config file '" + f.config + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  ms::RtmConfig cfg = ms::rtm_config_from_json(buf.str());
  if (f.steps >= 0) cfg.steps = f.steps;
  if (!f.decomp.empty()) cfg.decomp.proc = dims_from_flag(f.decomp, "--decomp");
  if (f.pipeline_layers > 0) cfg.decomp.pipeline_layers = f.pipeline_layers;
  if (!f.mode.empty()) cfg.decomp.mode = parse_mode(f.mode);

  nlohmann::json rep = cfg.precision == ms::Precision::F32
                           ? run_rtm_typed<float>(cfg, f)
                           : run_rtm_typed<double>(cfg, f);
  if (f.timing != "on") {
    rep.erase("emulated_wall_seconds");
    rep.erase("emulated_points_per_second");
    rep.erase("modeled_bandwidth_utilization");
  }
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(ms::rtm_config_to_json(cfg));
  j["report"] = rep;
  write_output(j.dump(2), f.output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matrix-tile stencil emulator and analytic models"};
  app.require_subcommand(1);

  BenchFlags bf;
  CLI::App* bench = app.add_subcommand("bench", "run emulated kernel sweeps");
  bench->add_option("--kernel", bf.kernel, "suite kernel name, or 'all'");
  bench->add_option("--grid", bf.grid, "interior extents X,Y,Z")->delimiter(',');
  bench->add_option("--precision", bf.precision)->check(CLI::IsMember({"f32", "f64"}));
  bench->add_option("--layout", bf.layout)->check(CLI::IsMember({"flat", "brick"}));
  bench->add_option("--workers", bf.workers, "parallel worker count");
  bench->add_flag("--snoop", bf.snoop, "serve worker halos from peer caches");
  bench->add_option("--seed", bf.seed, "input fill seed");
  bench->add_option("--reps", bf.reps, "repetitions; fastest wall time wins");
  bench->add_flag("--prefetch", bf.prefetch, "count software prefetch ops");
  bench->add_option("--x-pass", bf.x_pass)->check(CLI::IsMember({"transposed", "gather"}));
  bench->add_option("--machine", bf.machine, "machine model JSON path");
  bench->add_flag("--verify", bf.verify, "check results against the oracle");
  bench->add_option("--timing", bf.timing, "'off' omits wall-clock fields")
      ->check(CLI::IsMember({"on", "off"}));
  bench->add_flag("--inject-error", bf.inject_error,
                  "corrupt one output cell to prove the verifier notices");
  bench->add_option("--output", bf.output, "output path (default stdout)");
  bench->add_option("--format", bf.format)->check(CLI::IsMember({"json", "csv"}));

  BenchFlags vf;
  CLI::App* verify = app.add_subcommand("verify", "check kernels against the oracle");
  verify->add_option("--kernel", vf.kernel, "suite kernel name, or 'all'");
  verify->add_option("--grid", vf.grid, "interior extents X,Y,Z")->delimiter(',');
  verify->add_option("--precision", vf.precision)->check(CLI::IsMember({"f32", "f64"}));
  verify->add_option("--layout", vf.layout)->check(CLI::IsMember({"flat", "brick"}));
  verify->add_option("--workers", vf.workers, "parallel worker count");
  verify->add_flag("--snoop", vf.snoop, "serve worker halos from peer caches");
  verify->add_option("--seed", vf.seed, "input fill seed");
  verify->add_option("--x-pass", vf.x_pass)
      ->check(CLI::IsMember({"transposed", "gather"}));
  verify->add_option("--machine", vf.machine, "machine model JSON path");
  verify->add_flag("--inject-error", vf.inject_error,
                   "corrupt one output cell to prove the verifier notices");
  verify->add_option("--output", vf.output, "output path (default stdout)");

  AnalyzeFlags af;
  CLI::App* analyze = app.add_subcommand("analyze", "evaluate the analytic models");
  analyze->add_option("--kernel", af.kernel, "suite kernel name, or 'all'");
  analyze->add_option("--precision", af.precision)
      ->check(CLI::IsMember({"f32", "f64"}));
  analyze->add_option("--machine", af.machine, "machine model JSON path");
  analyze->add_option("--tile", af.tile, "analysis tile X,Y override")->delimiter(',');
  analyze->add_option("--wave", af.wave, "dx,dy,dz,f0,vmin,ppw grid sizing query")
      ->delimiter(',');
  analyze->add_option("--output", af.output, "output path (default stdout)");
  analyze->add_option("--format", af.format)->check(CLI::IsMember({"json", "csv"}));

  RtmFlags rf;
  CLI::App* rtm = app.add_subcommand("rtm", "run a wave-propagation simulation");
  rtm->add_option("--config", rf.config, "run config JSON path")->required();
  rtm->add_option("--steps", rf.steps, "override the configured step count");
  rtm->add_option("--decomp", rf.decomp, "process grid PX,PY,PZ override")
      ->delimiter(',');
  rtm->add_option("--pipeline-layers", rf.pipeline_layers,
                  "per-step exchange/compute layers override");
  rtm->add_option("--mode", rf.mode, "exchange mode override")
      ->check(CLI::IsMember({"sdma", "message"}));
  rtm->add_option("--timing", rf.timing, "'off' omits wall-clock fields")
      ->check(CLI::IsMember({"on", "off"}));
  rtm->add_option("--output", rf.output, "report path (default stdout)");
  rtm->add_option("--write-fields", rf.write_fields,
                  "write final fields to <prefix>_<name>.mmsg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(bench)) return run_bench(bf, false);
    if (app.got_subcommand(verify)) {
      vf.verify = true;
      return run_bench(vf, true);
    }
    if (app.got_subcommand(analyze)) return run_analyze(af);
    if (app.got_subcommand(rtm)) return run_rtm(rf);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
