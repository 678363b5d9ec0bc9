// Named stencil kernels of the benchmark suite with their reference tile
// shapes and expected roofline classes.
#pragma once

#include <string>
#include <vector>

#include "mmstencil/analysis.hpp"
#include "mmstencil/stencil_spec.hpp"

namespace mmstencil {

struct BenchKernel {
  std::string name;
  StencilSpec spec;
  Dims3 analysis_tile{0, 0, 0};  // tile shape used by the analytic models
  Dims3 default_grid{0, 0, 0};   // emulation-scale default interior
  RooflineClass expected_class = RooflineClass::MemoryBound;
};

const std::vector<BenchKernel>& bench_suite();

// Throws UnsupportedKernelError naming the kernel and listing known ones.
const BenchKernel& find_bench_kernel(const std::string& name);

std::vector<std::string> bench_kernel_names();

// Halo widths used with the analytic models: one brick on each face.
Dims3 analysis_halo(const BenchKernel& k, Precision p);

}  // namespace mmstencil
