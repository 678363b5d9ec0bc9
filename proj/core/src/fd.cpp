#include "mmstencil/fd.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <string>

namespace mmstencil {

namespace {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Gaussian elimination with partial (magnitude) pivoting over exact
// rationals. The moment matrix is a transposed Vandermonde on the nodes
// -r..r, which is nonsingular, so a zero pivot cannot occur.
std::vector<Rational> solve_exact(std::vector<std::vector<Rational>> a,
                                  std::vector<Rational> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (abs(a[r][col]) > abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      if (a[r][col] == 0) continue;
      const Rational f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<Rational> x(n);
  for (std::size_t i = n; i-- > 0;) {
    Rational s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

std::int64_t to_int64_checked(const BigInt& v, const char* what) {
  if (v > BigInt(INT64_MAX) || v < BigInt(INT64_MIN))
    throw std::invalid_argument(std::string("fd coefficient ") + what +
                                " exceeds 64-bit range; radius too large");
  return static_cast<std::int64_t>(v);
}

}  // namespace

CoefficientTable generate_fd_coefficients(int radius, Derivative order, double h) {
  if (radius < 1)
    throw std::invalid_argument("fd radius must be >= 1, got " + std::to_string(radius));
  if (!(h > 0.0)) throw std::invalid_argument("fd spacing h must be positive");

  const int n = 2 * radius + 1;
  std::vector<std::vector<Rational>> a(static_cast<std::size_t>(n),
                                       std::vector<Rational>(static_cast<std::size_t>(n)));
  std::vector<Rational> rhs(static_cast<std::size_t>(n), Rational(0));
  for (int j = 0; j < n; ++j) {
    for (int k = -radius; k <= radius; ++k) {
      BigInt p = 1;
      for (int e = 0; e < j; ++e) p *= k;
      a[static_cast<std::size_t>(j)][static_cast<std::size_t>(k + radius)] = Rational(p);
    }
  }
  rhs[static_cast<std::size_t>(static_cast<int>(order))] =
      order == Derivative::First ? Rational(1) : Rational(2);

  const std::vector<Rational> c = solve_exact(std::move(a), rhs);

  CoefficientTable table;
  table.radius = radius;
  table.order = order;
  table.spacing = h;
  const double hpow = order == Derivative::First ? h : h * h;
  table.coeffs.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Rational& r = c[static_cast<std::size_t>(i)];
    FdCoefficient fc;
    fc.num = to_int64_checked(numerator(r), "numerator");
    fc.den = to_int64_checked(denominator(r), "denominator");
    fc.value = static_cast<double>(r) / hpow;
    table.coeffs[static_cast<std::size_t>(i)] = fc;
  }
  return table;
}

}  // namespace mmstencil
