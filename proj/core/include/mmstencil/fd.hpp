// Central finite-difference coefficient generation.
#pragma once

#include <cstdint>
#include <vector>

#include "mmstencil/common.hpp"

namespace mmstencil {

enum class Derivative : int { First = 1, Second = 2 };

// One coefficient: exact unit-spacing rational (num/den, normalized,
// den > 0) plus the working double value, i.e. (num/den) / h^order.
struct FdCoefficient {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value = 0.0;
};

// Symmetric coefficient table for offsets -radius .. +radius.
struct CoefficientTable {
  int radius = 0;
  Derivative order = Derivative::Second;
  double spacing = 1.0;
  int axis = 0;  // 0=x, 1=y, 2=z; a tag consumed by kernel builders
  std::vector<FdCoefficient> coeffs;  // size 2*radius+1, index k+radius

  const FdCoefficient& at_offset(int k) const { return coeffs[static_cast<std::size_t>(k + radius)]; }
  double value_at(int k) const { return at_offset(k).value; }
  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(coeffs.size());
    for (const auto& c : coeffs) v.push_back(c.value);
    return v;
  }
  CoefficientTable with_axis(int a) const {
    CoefficientTable t = *this;
    t.axis = a;
    return t;
  }
};

// Unique central-difference table of maximal order 2*radius for the
// requested derivative, from the exact rational solve of the Taylor
// moment system sum_k c_k k^j = j! * [j == order], j = 0..2*radius.
// Throws std::invalid_argument for radius < 1 or h <= 0.
CoefficientTable generate_fd_coefficients(int radius, Derivative order, double h);

}  // namespace mmstencil
