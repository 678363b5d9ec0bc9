#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>
#include <vector>

#include "mmstencil/tile_engine.hpp"

using namespace mmstencil;

namespace {

template <typename T>
VectorReg<T> make_reg(const std::vector<T>& v) {
  VectorReg<T> r;
  r.n = static_cast<int>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r.lane[i] = v[i];
  return r;
}

}  // namespace

TEST_CASE("outer products accumulate col*row per masked lane") {
  TileEngine<float> e(4, 2);
  const auto col = make_reg<float>({1, 2, 3, 4});
  const auto row = make_reg<float>({10, 20, 30, 40});
  e.zero_tile(1);
  e.outer_product(1, col, row, full_mask(4), full_mask(4));
  e.outer_product(1, col, row, full_mask(4), 0b0101);  // only row lanes 0 and 2
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const float once = col.lane[i] * row.lane[j];
      const float want = (j % 2 == 0) ? 2 * once : once;
      CHECK(e.tile_value(1, i, j) == want);
    }

  // Masked-off column lanes leave rows untouched.
  e.zero_tile(0);
  e.outer_product(0, col, row, 0b0010, full_mask(4));
  for (int j = 0; j < 4; ++j) {
    CHECK(e.tile_value(0, 0, j) == 0.0f);
    CHECK(e.tile_value(0, 1, j) == col.lane[1] * row.lane[j]);
  }
}

TEST_CASE("slice insert/extract round trips both orientations") {
  TileEngine<double> e(4, 2);
  e.zero_tile(0);
  const auto v = make_reg<double>({1.5, -2.5, 3.5, 4.5});
  e.slice_insert(0, 2, true, v);
  const auto h = e.slice_extract(0, 2, true);
  for (int j = 0; j < 4; ++j) CHECK(h.lane[j] == v.lane[j]);
  for (int j = 0; j < 4; ++j) CHECK(e.tile_value(0, 2, j) == v.lane[j]);

  e.slice_insert(0, 1, false, v);
  for (int i = 0; i < 4; ++i) CHECK(e.tile_value(0, i, 1) == v.lane[i]);
  const auto c = e.slice_extract(0, 1, false);
  for (int i = 0; i < 4; ++i) CHECK(c.lane[i] == v.lane[i]);
}

TEST_CASE("load_row clips lanes outside the limit") {
  TileEngine<float> e(4, 2);
  const float buf[6] = {0, 1, 2, 3, 4, 5};
  LaneMask valid = 0;
  // Lanes map to indices first..first+3; indices outside [0, limit) read 0.
  const auto r = e.load_row(buf, -1, 3, 4, OpTag::Input, 0, &valid);
  CHECK(valid == 0b1110);
  CHECK(r.lane[0] == 0.0f);
  CHECK(r.lane[1] == buf[0]);
  CHECK(r.lane[2] == buf[1]);
  CHECK(r.lane[3] == buf[2]);

  LaneMask tail = 0;
  const auto t = e.load_row(buf, 4, 6, 4, OpTag::Input, 0, &tail);
  CHECK(tail == 0b0011);
  CHECK(t.lane[1] == buf[5]);
  CHECK(t.lane[2] == 0.0f);
}

TEST_CASE("strided load and row store move data and trace it") {
  TileEngine<float> e(4, 2);
  const float src[8] = {1, 9, 2, 9, 3, 9, 4, 9};
  const auto v = e.load_strided(src, 2, 4, OpTag::Gather, 0);
  for (int i = 0; i < 4; ++i) CHECK(v.lane[i] == float(i + 1));

  float dst[4] = {};
  e.store_row(dst, v, 4, OpTag::Dest, 0);
  for (int i = 0; i < 4; ++i) CHECK(dst[i] == float(i + 1));

  CHECK(e.trace().count(OpKind::VectorLoad, OpTag::Gather) == 1);
  CHECK(e.trace().count(OpKind::VectorStore, OpTag::Dest) == 1);
  e.clear_trace();
  CHECK(e.trace().size() == 0);
}

TEST_CASE("splice shifts across the lane concatenation") {
  TileEngine<float> e(4, 2);
  const auto lo = make_reg<float>({0, 1, 2, 3});
  const auto hi = make_reg<float>({4, 5, 6, 7});
  for (int shift = 0; shift <= 4; ++shift) {
    const auto r = e.splice(lo, hi, shift);
    for (int i = 0; i < 4; ++i) CHECK(r.lane[i] == float(shift + i));
  }
  CHECK(e.trace().count(OpKind::Splice) == 5);
}

TEST_CASE("tile-assisted transpose: correct and 2*VL slice ops") {
  const int vl = 16;
  TileEngine<float> e(vl, 4);
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> d(-1, 1);
  std::vector<float> src(vl * vl), dst(vl * vl, 0.0f);
  for (auto& x : src) x = d(rng);

  e.transpose_block(src.data(), vl, dst.data(), vl);
  for (int i = 0; i < vl; ++i)
    for (int j = 0; j < vl; ++j) CHECK(dst[j * vl + i] == src[i * vl + j]);

  const std::size_t slices =
      e.trace().count(OpKind::SliceLoad) + e.trace().count(OpKind::SliceStore);
  CHECK(slices == std::size_t(2 * vl));
  // The SIMD shuffle-network alternative costs VL*log2(VL) = 64 ops.
  CHECK(slices < std::size_t(64));
}

TEST_CASE("interleaving checker flags back-to-back same-tile issues") {
  InstructionTrace good;
  for (int i = 0; i < 12; ++i)
    good.ops.push_back({OpKind::OuterProduct, std::uint8_t(i % 4), OpTag::None, 0, 0});
  const InterleaveReport g = check_interleaving(good);
  CHECK(g.compliant);
  CHECK(g.max_same_tile_run == 1);
  CHECK(g.active_tiles == 4);
  CHECK(g.outer_products == 12);

  InstructionTrace bad = good;  // ends on tile 3; two tile-0 issues make a run of 2
  bad.ops.push_back({OpKind::OuterProduct, std::uint8_t(0), OpTag::None, 0, 0});
  bad.ops.push_back({OpKind::OuterProduct, std::uint8_t(0), OpTag::None, 0, 0});
  const InterleaveReport b = check_interleaving(bad);
  CHECK_FALSE(b.compliant);
  CHECK(b.max_same_tile_run == 2);

  // Non-outer-product ops between issues do not reset the run.
  InstructionTrace mixed;
  mixed.ops.push_back({OpKind::OuterProduct, 1, OpTag::None, 0, 0});
  mixed.ops.push_back({OpKind::VectorLoad, 0xff, OpTag::Input, 0, 0});
  mixed.ops.push_back({OpKind::OuterProduct, 1, OpTag::None, 0, 0});
  CHECK_FALSE(check_interleaving(mixed).compliant);
}

TEST_CASE("trace dumps one JSON object per line") {
  TileEngine<float> e(4, 2);
  const auto v = make_reg<float>({1, 2, 3, 4});
  e.outer_product(0, v, v, full_mask(4), full_mask(4));
  float dst[4];
  e.store_row(dst, v, 4, OpTag::Dest, 42);

  std::ostringstream os;
  dump_trace_jsonl(e.trace(), os);
  std::istringstream is(os.str());
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    ++lines;
    CHECK(line.front() == '{');
    CHECK(line.back() == '}');
    CHECK(line.find("\"kind\"") != std::string::npos);
  }
  CHECK(lines == 2);
}

TEST_CASE("engine validates indices") {
  TileEngine<float> e(4, 2);
  const auto v = make_reg<float>({1, 2, 3, 4});
  CHECK_THROWS_AS(e.zero_tile(2), std::invalid_argument);
  CHECK_THROWS_AS(e.outer_product(-1, v, v, full_mask(4), full_mask(4)),
                  std::invalid_argument);
  CHECK_THROWS_AS(e.slice_extract(0, 4, true), std::invalid_argument);
  CHECK_THROWS_AS(e.splice(v, v, 5), std::invalid_argument);
}
