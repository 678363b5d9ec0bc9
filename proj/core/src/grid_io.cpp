#include "mmstencil/grid_io.hpp"

#include <cstring>
#include <fstream>
#include <limits>

namespace mmstencil {

namespace {

void put_u16(unsigned char* p, std::uint16_t v) {
  p[0] = static_cast<unsigned char>(v & 0xff);
  p[1] = static_cast<unsigned char>((v >> 8) & 0xff);
}

void put_u32(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint32_t checked_u32(std::int64_t v, const char* what) {
  if (v < 0 || v > std::numeric_limits<std::uint32_t>::max())
    throw ConfigError(std::string("grid file ") + what + " out of u32 range");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

template <typename T>
void write_grid(const Grid3<T>& g, std::ostream& os) {
  unsigned char header[32] = {};
  std::memcpy(header, "MMSG", 4);
  put_u16(header + 4, kGridFileVersion);
  header[6] = static_cast<unsigned char>(sizeof(T) == 4 ? Precision::F32 : Precision::F64);
  header[7] = 0;
  for (int a = 0; a < 3; ++a) {
    put_u32(header + 8 + 4 * a, checked_u32(g.interior()[a], "interior extent"));
    put_u32(header + 20 + 4 * a, checked_u32(g.halo()[a], "halo width"));
  }
  os.write(reinterpret_cast<const char*>(header), sizeof(header));
  os.write(reinterpret_cast<const char*>(g.data()),
           static_cast<std::streamsize>(g.size() * sizeof(T)));
  if (!os) throw ConfigError("grid file write failed");
}

template <typename T>
void write_grid(const Grid3<T>& g, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open grid file for writing: " + path);
  write_grid(g, f);
}

namespace {

template <typename T>
Grid3<T> read_payload(std::istream& is, Dims3 interior, Dims3 halo) {
  Grid3<T> g(interior, halo);
  is.read(reinterpret_cast<char*>(g.data()),
          static_cast<std::streamsize>(g.size() * sizeof(T)));
  if (!is) throw ConfigError("grid file truncated: payload shorter than header promises");
  return g;
}

}  // namespace

AnyGrid read_grid(std::istream& is) {
  unsigned char header[32];
  is.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!is) throw ConfigError("grid file truncated: header shorter than 32 bytes");
  if (std::memcmp(header, "MMSG", 4) != 0)
    throw ConfigError("grid file has bad magic (expected \"MMSG\")");
  const std::uint16_t version = get_u16(header + 4);
  if (version != kGridFileVersion)
    throw ConfigError("grid file version " + std::to_string(version) + " unsupported");
  const unsigned char prec = header[6];
  if (prec > 1) throw ConfigError("grid file precision byte invalid");
  Dims3 interior, halo;
  for (int a = 0; a < 3; ++a) {
    interior[a] = get_u32(header + 8 + 4 * a);
    halo[a] = get_u32(header + 20 + 4 * a);
  }
  if (prec == static_cast<unsigned char>(Precision::F32))
    return read_payload<float>(is, interior, halo);
  return read_payload<double>(is, interior, halo);
}

AnyGrid read_grid(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open grid file: " + path);
  return read_grid(f);
}

template <typename T>
Grid3<T> read_grid_as(const std::string& path) {
  AnyGrid g = read_grid(path);
  if (auto* p = std::get_if<Grid3<T>>(&g)) return std::move(*p);
  throw ConfigError("grid file precision differs from requested type: " + path);
}

template void write_grid(const Grid3<float>&, std::ostream&);
template void write_grid(const Grid3<double>&, std::ostream&);
template void write_grid(const Grid3<float>&, const std::string&);
template void write_grid(const Grid3<double>&, const std::string&);
template Grid3<float> read_grid_as(const std::string&);
template Grid3<double> read_grid_as(const std::string&);

}  // namespace mmstencil
