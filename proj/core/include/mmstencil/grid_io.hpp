// Binary grid files.
//
// Layout (little-endian), 32-byte header then raw padded data in storage
// order (x innermost, then y, then z):
//   bytes 0..3   magic "MMSG"
//   bytes 4..5   format version (u16), currently 1
//   byte  6      precision (u8): 0 = f32, 1 = f64
//   byte  7      reserved, 0
//   bytes 8..19  interior extents, three u32 (x, y, z)
//   bytes 20..31 halo widths, three u32 (x, y, z)
#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "mmstencil/grid.hpp"

namespace mmstencil {

inline constexpr std::uint16_t kGridFileVersion = 1;

using AnyGrid = std::variant<Grid3<float>, Grid3<double>>;

template <typename T>
void write_grid(const Grid3<T>& g, std::ostream& os);
template <typename T>
void write_grid(const Grid3<T>& g, const std::string& path);

AnyGrid read_grid(std::istream& is);
AnyGrid read_grid(const std::string& path);

// Typed read; throws ConfigError when the file's precision differs.
template <typename T>
Grid3<T> read_grid_as(const std::string& path);

}  // namespace mmstencil
