#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "mmstencil/grid.hpp"

using namespace mmstencil;

TEST_CASE("Dims3 basics") {
  Dims3 d{3, 4, 5};
  CHECK(d.volume() == 60);
  CHECK(d[0] == 3);
  CHECK(d[1] == 4);
  CHECK(d[2] == 5);
  d[1] = 7;
  CHECK(d.y == 7);
  CHECK(d == Dims3{3, 7, 5});
  CHECK(d != Dims3{3, 7, 6});
}

TEST_CASE("Grid3 construction and layout") {
  Grid3<float> g({4, 3, 2}, {1, 2, 0});
  CHECK(g.interior() == Dims3{4, 3, 2});
  CHECK(g.halo() == Dims3{1, 2, 0});
  CHECK(g.padded() == Dims3{6, 7, 2});
  CHECK(g.size() == 84);
  CHECK(g.row_stride() == 6);
  CHECK(g.plane_stride() == 42);

  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.data()[i] == 0.0f);

  // Interior frame: (x,y,z) lands at ((z+hz)*py + (y+hy))*px + (x+hx).
  CHECK(g.offset(0, 0, 0) == 13);
  CHECK(g.offset(-1, -2, 0) == 0);
  CHECK(g.offset(3, 2, 1) == ((1 + 0) * 7 + (2 + 2)) * 6 + (3 + 1));

  g.at(2, 1, 1) = 5.0f;
  CHECK(g.data()[g.offset(2, 1, 1)] == 5.0f);
  g.at(-1, -2, 0) = 7.0f;
  CHECK(g.data()[0] == 7.0f);

  CHECK(g.same_shape(Grid3<float>({4, 3, 2}, {1, 2, 0})));
  CHECK_FALSE(g.same_shape(Grid3<float>({4, 3, 2}, {1, 1, 0})));
}

TEST_CASE("Grid3 rejects bad shapes") {
  CHECK_THROWS_AS(Grid3<float>({0, 3, 2}, {0, 0, 0}), ShapeError);
  CHECK_THROWS_AS(Grid3<float>({4, -1, 2}, {0, 0, 0}), ShapeError);
  CHECK_THROWS_AS(Grid3<float>({4, 3, 2}, {-1, 0, 0}), ShapeError);
}

TEST_CASE("BrickGrid offsets are a bijection over the padded volume") {
  BrickGrid<float> b({12, 6, 4}, {2, 1, 2}, {4, 2, 2});
  const Dims3 p = b.padded();
  CHECK(p == Dims3{16, 8, 8});
  CHECK(b.brick_counts() == Dims3{4, 4, 4});

  std::set<std::int64_t> seen;
  for (std::int64_t z = -2; z < 6; ++z)
    for (std::int64_t y = -1; y < 7; ++y)
      for (std::int64_t x = -2; x < 14; ++x) {
        const std::int64_t off = b.offset(x, y, z);
        CHECK(off >= 0);
        CHECK(off < p.volume());
        seen.insert(off);
      }
  CHECK(seen.size() == static_cast<std::size_t>(p.volume()));
}

TEST_CASE("BrickGrid keeps a brick contiguous") {
  BrickGrid<float> b({16, 8, 8}, {0, 0, 0}, {4, 2, 2});
  // Walking x within one brick advances storage by one element.
  for (int x = 0; x < 3; ++x) CHECK(b.offset(x + 1, 0, 0) == b.offset(x, 0, 0) + 1);
  // Crossing a brick boundary jumps a whole brick.
  CHECK(b.offset(4, 0, 0) - b.offset(3, 0, 0) == b.brick_volume() - 3);
  // Intra-brick y step is the brick row, not the padded row.
  CHECK(b.offset(0, 1, 0) - b.offset(0, 0, 0) == 4);
}

TEST_CASE("BrickGrid validates divisibility") {
  CHECK_THROWS_AS(BrickGrid<float>({10, 8, 8}, {0, 0, 0}, {4, 2, 2}), LayoutError);
  CHECK_THROWS_AS(BrickGrid<float>({16, 8, 8}, {0, 0, 0}, {4, 0, 2}), LayoutError);
  CHECK_NOTHROW(BrickGrid<float>({10, 8, 8}, {3, 0, 0}, {4, 2, 2}));  // padded x = 16
}

TEST_CASE("Precision defaults") {
  CHECK(default_brick(Precision::F32) == Dims3{16, 4, 4});
  CHECK(default_brick(Precision::F64) == Dims3{8, 4, 4});
  CHECK(element_bytes(Precision::F32) == 4);
  CHECK(element_bytes(Precision::F64) == 8);
}
