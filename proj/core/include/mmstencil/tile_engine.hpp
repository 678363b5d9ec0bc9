// Emulated matrix-tile engine: a register file of T independent V_L x V_L
// accumulator tiles fed by outer-product instructions, plus the
// slice/splice/transpose data paths and an instruction trace.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mmstencil/common.hpp"

namespace mmstencil {

inline constexpr int kMaxVectorLanes = 64;

enum class OpKind : std::uint8_t {
  OuterProduct = 0,
  SliceLoad = 1,
  SliceStore = 2,
  VectorLoad = 3,
  VectorStore = 4,
  Prefetch = 5,
  Splice = 6,
  TileZero = 7,
};

const char* to_string(OpKind k);

// Source/destination tag on memory-ish ops; lets tests count classes of
// accesses without parsing addresses.
enum class OpTag : std::uint16_t {
  None = 0,
  Input = 1,
  Scratch = 2,
  Dest = 3,
  Coeff = 4,
  BoxSegment = 5,
  Gather = 6,
  Transpose = 7,
};

const char* to_string(OpTag t);

struct OpRecord {
  OpKind kind = OpKind::OuterProduct;
  std::uint8_t tile = 0xff;  // 0xff: not tile-targeted
  OpTag tag = OpTag::None;
  std::uint32_t aux = 0;     // op-specific payload (outer-step id, lane shift, ...)
  std::uint64_t addr = 0;    // element address for memory ops
};

struct InstructionTrace {
  std::vector<OpRecord> ops;

  void clear() { ops.clear(); }
  std::size_t size() const { return ops.size(); }
  std::size_t count(OpKind k) const {
    std::size_t n = 0;
    for (const auto& op : ops) n += op.kind == k;
    return n;
  }
  std::size_t count(OpKind k, OpTag t) const {
    std::size_t n = 0;
    for (const auto& op : ops) n += (op.kind == k && op.tag == t);
    return n;
  }
  void append(const InstructionTrace& other) {
    ops.insert(ops.end(), other.ops.begin(), other.ops.end());
  }
};

// One JSON object per op, one op per line.
void dump_trace_jsonl(const InstructionTrace& trace, std::ostream& os);

struct InterleaveReport {
  int max_same_tile_run = 0;
  int active_tiles = 0;
  std::size_t outer_products = 0;
  bool compliant = true;  // no two back-to-back outer products hit one tile
};

InterleaveReport check_interleaving(const InstructionTrace& trace);

template <typename T>
struct VectorReg {
  std::array<T, kMaxVectorLanes> lane{};
  int n = 0;
};

using LaneMask = std::uint64_t;

inline LaneMask full_mask(int n) {
  return n >= 64 ? ~LaneMask(0) : ((LaneMask(1) << n) - 1);
}

// Default vector length of the working precision: 512-bit lanes.
inline int default_vector_length(Precision p) { return p == Precision::F32 ? 16 : 8; }

// Tile count modeled from the register-file footprint (V_L*eb)^2 bytes:
// (V_L*eb)^2 / (V_L^2*eb) tiles of V_L x V_L elements each.
inline int default_tile_count(Precision p) { return static_cast<int>(element_bytes(p)); }

template <typename T>
class TileEngine {
 public:
  explicit TileEngine(int vector_length = default_vector_length(
                          sizeof(T) == 4 ? Precision::F32 : Precision::F64),
                      int tiles = default_tile_count(
                          sizeof(T) == 4 ? Precision::F32 : Precision::F64));

  int vector_length() const { return vl_; }
  int tile_count() const { return tiles_; }

  void zero_tile(int t);

  // tile[i][j] += col[i] * row[j] for every masked-on lane pair, in T
  // precision. Masked-off lanes are neither read nor written.
  void outer_product(int t, const VectorReg<T>& col, const VectorReg<T>& row,
                     LaneMask col_mask, LaneMask row_mask, OpTag tag = OpTag::None,
                     std::uint32_t aux = 0);

  // Horizontal slice i is tile row i; vertical slice j is tile column j.
  void slice_insert(int t, int index, bool horizontal, const VectorReg<T>& v);
  VectorReg<T> slice_extract(int t, int index, bool horizontal);

  T tile_value(int t, int i, int j) const;

  // Memory-path ops: they move data and record the trace. `addr` is an
  // element address in whatever frame the caller works in. A negative
  // stride-clipped lane (outside [0, limit)) reads as zero with its mask
  // bit cleared in *valid.
  VectorReg<T> load_row(const T* base, std::int64_t first, std::int64_t limit, int lanes,
                        OpTag tag, std::uint64_t addr, LaneMask* valid,
                        std::uint32_t aux = 0);
  VectorReg<T> load_strided(const T* base, std::int64_t stride, int lanes, OpTag tag,
                            std::uint64_t addr);
  void store_row(T* dst, const VectorReg<T>& v, int lanes, OpTag tag, std::uint64_t addr);
  void prefetch(std::uint64_t addr, OpTag tag = OpTag::Input);

  // Two-source lane shift: result lane i = concat(lo, hi)[shift + i].
  VectorReg<T> splice(const VectorReg<T>& lo, const VectorReg<T>& hi, int shift,
                      OpTag tag = OpTag::None, std::uint32_t aux = 0);

  // Transpose a V_L x V_L block: V_L horizontal slice loads through the
  // staging tile, then V_L vertical slice stores. src/dst are row-major
  // with the given row strides; exactly 2*V_L slice ops are traced.
  void transpose_block(const T* src, std::int64_t src_stride, T* dst,
                       std::int64_t dst_stride);

  InstructionTrace& trace() { return trace_; }
  const InstructionTrace& trace() const { return trace_; }
  void clear_trace() { trace_.clear(); }

 private:
  void check_tile(int t) const;
  T* tile_data(int t) { return tiles_data_.data() + static_cast<std::size_t>(t) * vl_ * vl_; }
  const T* tile_data(int t) const {
    return tiles_data_.data() + static_cast<std::size_t>(t) * vl_ * vl_;
  }

  int vl_;
  int tiles_;
  std::vector<T> tiles_data_;    // tiles_ + 1 tiles; the last is transpose staging
  InstructionTrace trace_;
};

extern template class TileEngine<float>;
extern template class TileEngine<double>;

}  // namespace mmstencil
