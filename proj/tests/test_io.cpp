#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>

#include "mmstencil/grid_io.hpp"

using namespace mmstencil;

namespace {

template <typename T>
Grid3<T> random_grid(Dims3 interior, Dims3 halo, unsigned seed) {
  Grid3<T> g(interior, halo);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = static_cast<T>(d(rng));
  return g;
}

template <typename T>
bool bitwise_equal(const Grid3<T>& a, const Grid3<T>& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

}  // namespace

TEST_CASE("stream round trip keeps shape and bits, f32 and f64") {
  const Grid3<float> gf = random_grid<float>({7, 5, 3}, {2, 1, 0}, 11);
  std::stringstream ss;
  write_grid(gf, ss);
  const AnyGrid any = read_grid(ss);
  REQUIRE(std::holds_alternative<Grid3<float>>(any));
  CHECK(bitwise_equal(std::get<Grid3<float>>(any), gf));

  const Grid3<double> gd = random_grid<double>({4, 6, 2}, {0, 0, 1}, 12);
  std::stringstream sd;
  write_grid(gd, sd);
  const AnyGrid anyd = read_grid(sd);
  REQUIRE(std::holds_alternative<Grid3<double>>(anyd));
  CHECK(bitwise_equal(std::get<Grid3<double>>(anyd), gd));
}

TEST_CASE("header bytes are the documented fixed layout") {
  const Grid3<float> g = random_grid<float>({258, 5, 3}, {2, 1, 0}, 13);
  std::stringstream ss;
  write_grid(g, ss);
  const std::string bytes = ss.str();
  REQUIRE(bytes.size() == 32 + g.size() * sizeof(float));
  CHECK(bytes.compare(0, 4, "MMSG") == 0);
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);  // version, little-endian u16
  CHECK(static_cast<unsigned char>(bytes[5]) == 0);
  CHECK(static_cast<unsigned char>(bytes[6]) == 0);  // f32
  CHECK(static_cast<unsigned char>(bytes[7]) == 0);
  // interior.x = 258 = 0x102
  CHECK(static_cast<unsigned char>(bytes[8]) == 0x02);
  CHECK(static_cast<unsigned char>(bytes[9]) == 0x01);
  CHECK(static_cast<unsigned char>(bytes[12]) == 5);   // interior.y
  CHECK(static_cast<unsigned char>(bytes[16]) == 3);   // interior.z
  CHECK(static_cast<unsigned char>(bytes[20]) == 2);   // halo.x
  CHECK(static_cast<unsigned char>(bytes[24]) == 1);   // halo.y
  CHECK(static_cast<unsigned char>(bytes[28]) == 0);   // halo.z

  std::stringstream sd;
  write_grid(random_grid<double>({2, 2, 2}, {0, 0, 0}, 1), sd);
  CHECK(sd.str()[6] == 1);  // f64 precision byte
}

TEST_CASE("file path round trip and typed read") {
  const std::string path = "io_rt.mmsg";
  const Grid3<double> g = random_grid<double>({6, 4, 5}, {1, 2, 0}, 21);
  write_grid(g, path);
  CHECK(bitwise_equal(read_grid_as<double>(path), g));
  CHECK_THROWS_AS(read_grid_as<float>(path), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("malformed inputs are rejected") {
  std::stringstream empty;
  CHECK_THROWS_AS(read_grid(empty), ConfigError);

  const Grid3<float> g = random_grid<float>({3, 3, 3}, {0, 0, 0}, 5);
  std::stringstream ss;
  write_grid(g, ss);
  std::string bytes = ss.str();

  std::stringstream bad_magic(std::string("XXSG") + bytes.substr(4));
  CHECK_THROWS_AS(read_grid(bad_magic), ConfigError);

  std::string v2 = bytes;
  v2[4] = 2;
  std::stringstream bad_version(v2);
  CHECK_THROWS_AS(read_grid(bad_version), ConfigError);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 7));
  CHECK_THROWS_AS(read_grid(truncated), ConfigError);

  CHECK_THROWS_AS(read_grid("no_such_file.mmsg"), ConfigError);
}
