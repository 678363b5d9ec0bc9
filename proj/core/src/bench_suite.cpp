#include "mmstencil/bench_suite.hpp"

#include <sstream>

#include "mmstencil/fd.hpp"
#include "mmstencil/grid.hpp"

namespace mmstencil {

namespace {

BenchKernel star(std::string name, int dims, int radius, Dims3 tile, Dims3 grid,
                 RooflineClass cls) {
  BenchKernel k;
  k.name = std::move(name);
  k.spec = make_star_spec(dims, radius);
  k.analysis_tile = tile;
  k.default_grid = grid;
  k.expected_class = cls;
  return k;
}

BenchKernel box(std::string name, int dims, int radius, Dims3 tile, Dims3 grid,
                RooflineClass cls) {
  BenchKernel k;
  k.name = std::move(name);
  k.spec = make_box_spec(dims, radius);
  k.analysis_tile = tile;
  k.default_grid = grid;
  k.expected_class = cls;
  return k;
}

}  // namespace

const std::vector<BenchKernel>& bench_suite() {
  static const std::vector<BenchKernel> suite = [] {
    const Dims3 g2{1024, 1024, 1};
    const Dims3 g3{128, 128, 128};
    std::vector<BenchKernel> s;
    s.push_back(star("2dstar_r2", 2, 2, {512, 512, 1}, g2, RooflineClass::MemoryBound));
    s.push_back(star("2dstar_r4", 2, 4, {512, 512, 1}, g2, RooflineClass::MemoryBound));
    s.push_back(box("2dbox_r2", 2, 2, {512, 512, 1}, g2, RooflineClass::MemoryBound));
    s.push_back(box("2dbox_r3", 2, 3, {512, 512, 1}, g2, RooflineClass::Both));
    s.push_back(star("3dstar_r2", 3, 2, {256, 16, 128}, g3, RooflineClass::MemoryBound));
    s.push_back(star("3dstar_r4", 3, 4, {256, 32, 64}, g3, RooflineClass::MemoryBound));
    s.push_back(box("3dbox_r1", 3, 1, {256, 16, 128}, g3, RooflineClass::MemoryBound));
    s.push_back(box("3dbox_r2", 3, 2, {256, 16, 128}, g3, RooflineClass::ComputeBound));
    return s;
  }();
  return suite;
}

const BenchKernel& find_bench_kernel(const std::string& name) {
  for (const auto& k : bench_suite())
    if (k.name == name) return k;
  std::ostringstream msg;
  msg << "unknown kernel \"" << name << "\"; known kernels:";
  for (const auto& k : bench_suite()) msg << ' ' << k.name;
  throw UnsupportedKernelError(msg.str());
}

std::vector<std::string> bench_kernel_names() {
  std::vector<std::string> names;
  for (const auto& k : bench_suite()) names.push_back(k.name);
  return names;
}

Dims3 analysis_halo(const BenchKernel& k, Precision p) {
  Dims3 b = default_brick(p);
  if (k.spec.dims == 2) b.z = 0;
  return b;
}

}  // namespace mmstencil
