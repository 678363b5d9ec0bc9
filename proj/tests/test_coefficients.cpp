#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mmstencil/fd.hpp"

using namespace mmstencil;

namespace {

// n! as double; radii here stay far below overflow.
double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

TEST_CASE("radius-4 second derivative, exact rationals") {
  const CoefficientTable t = generate_fd_coefficients(4, Derivative::Second, 1.0);
  CHECK(t.radius == 4);
  CHECK(t.coeffs.size() == 9);

  // Normalized rationals: center -205/72, then 8/5, -1/5, 8/315, -1/560.
  CHECK(t.at_offset(0).num == -205);
  CHECK(t.at_offset(0).den == 72);
  CHECK(t.at_offset(1).num == 8);
  CHECK(t.at_offset(1).den == 5);
  CHECK(t.at_offset(2).num == -1);
  CHECK(t.at_offset(2).den == 5);
  CHECK(t.at_offset(3).num == 8);
  CHECK(t.at_offset(3).den == 315);
  CHECK(t.at_offset(4).num == -1);
  CHECK(t.at_offset(4).den == 560);

  for (int k = 1; k <= 4; ++k) {
    CHECK(t.at_offset(k).num == t.at_offset(-k).num);
    CHECK(t.at_offset(k).den == t.at_offset(-k).den);
  }
  CHECK(t.value_at(1) == doctest::Approx(1.6).epsilon(1e-15));
}

TEST_CASE("small-radius tables") {
  const CoefficientTable s1 = generate_fd_coefficients(1, Derivative::Second, 1.0);
  CHECK(s1.value_at(-1) == 1.0);
  CHECK(s1.value_at(0) == -2.0);
  CHECK(s1.value_at(1) == 1.0);

  const CoefficientTable f1 = generate_fd_coefficients(1, Derivative::First, 1.0);
  CHECK(f1.at_offset(-1).num == -1);
  CHECK(f1.at_offset(-1).den == 2);
  CHECK(f1.at_offset(0).num == 0);
  CHECK(f1.at_offset(1).num == 1);
  CHECK(f1.at_offset(1).den == 2);

  const CoefficientTable f2 = generate_fd_coefficients(2, Derivative::First, 1.0);
  CHECK(f2.at_offset(1).num == 2);
  CHECK(f2.at_offset(1).den == 3);
  CHECK(f2.at_offset(2).num == -1);
  CHECK(f2.at_offset(2).den == 12);
  for (int k = 1; k <= 2; ++k) CHECK(f2.at_offset(-k).num == -f2.at_offset(k).num);
}

TEST_CASE("Taylor moment conditions hold up to order 2r") {
  for (int r = 1; r <= 6; ++r) {
    for (Derivative d : {Derivative::First, Derivative::Second}) {
      const CoefficientTable t = generate_fd_coefficients(r, d, 1.0);
      const int order = static_cast<int>(d);
      for (int j = 0; j <= 2 * r; ++j) {
        double sum = 0.0, scale = 0.0;
        for (int k = -r; k <= r; ++k) {
          const double term = t.value_at(k) * std::pow(double(k), j);
          sum += term;
          scale = std::max(scale, std::abs(term));
        }
        const double want = j == order ? factorial(order) : 0.0;
        CHECK(std::abs(sum - want) <= 1e-9 * std::max(1.0, scale));
      }
    }
  }
}

TEST_CASE("spacing scales values, not rationals") {
  const CoefficientTable t2 = generate_fd_coefficients(3, Derivative::Second, 0.5);
  const CoefficientTable t1 = generate_fd_coefficients(3, Derivative::Second, 1.0);
  for (int k = -3; k <= 3; ++k) {
    CHECK(t2.at_offset(k).num == t1.at_offset(k).num);
    CHECK(t2.at_offset(k).den == t1.at_offset(k).den);
    CHECK(t2.value_at(k) == doctest::Approx(t1.value_at(k) / 0.25).epsilon(1e-14));
  }
  const CoefficientTable f = generate_fd_coefficients(2, Derivative::First, 0.5);
  CHECK(f.value_at(1) == doctest::Approx((2.0 / 3.0) / 0.5).epsilon(1e-14));
}

TEST_CASE("with_axis relabels without touching coefficients") {
  const CoefficientTable t = generate_fd_coefficients(2, Derivative::Second, 1.0);
  const CoefficientTable z = t.with_axis(2);
  CHECK(z.axis == 2);
  CHECK(z.values() == t.values());
}

TEST_CASE("invalid requests") {
  CHECK_THROWS_AS(generate_fd_coefficients(0, Derivative::Second, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_fd_coefficients(-2, Derivative::First, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_fd_coefficients(2, Derivative::Second, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generate_fd_coefficients(2, Derivative::Second, -1.0),
                  std::invalid_argument);
}
