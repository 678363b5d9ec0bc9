// Shared basic types and error taxonomy for the mmstencil library.
#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmstencil {

enum class Precision : std::uint8_t { F32 = 0, F64 = 1 };

inline std::size_t element_bytes(Precision p) {
  return p == Precision::F32 ? 4 : 8;
}

inline const char* to_string(Precision p) {
  return p == Precision::F32 ? "f32" : "f64";
}

// Extents / coordinates. Axis order is always (x, y, z); x is the
// innermost (unit-stride) storage dimension.
struct Dims3 {
  std::int64_t x = 0, y = 0, z = 0;

  std::int64_t volume() const { return x * y * z; }
  std::int64_t operator[](int axis) const {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }
  std::int64_t& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
  bool operator==(const Dims3&) const = default;
};

// Storage order of a padded field: row-major x-innermost, or brick-tiled.
enum class Layout { Flat, Brick };

inline const char* to_string(Layout l) { return l == Layout::Flat ? "flat" : "brick"; }

inline const char* axis_name(int axis) {
  static const char* names[3] = {"x", "y", "z"};
  return names[axis];
}

// Error taxonomy. Each class corresponds to one family of precondition
// failures; messages name the offending axis/argument where applicable.
struct LayoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct HaloError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedKernelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PlanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConflictError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mmstencil
