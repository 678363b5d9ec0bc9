// Brute-force reference stencil application. Every other compute path in
// the library is validated against this.
#pragma once

#include "mmstencil/grid.hpp"
#include "mmstencil/stencil_spec.hpp"

namespace mmstencil {

// out(p) = sum over entries of value * in(p + offset), accumulated in
// double regardless of T, for every interior point. The output halo is
// zero. Throws HaloError when the input halo is smaller than the
// stencil's reach on some axis.
template <typename T>
Grid3<T> oracle_apply(const StencilSpec& spec, const Grid3<T>& in);

extern template Grid3<float> oracle_apply(const StencilSpec&, const Grid3<float>&);
extern template Grid3<double> oracle_apply(const StencilSpec&, const Grid3<double>&);

}  // namespace mmstencil
