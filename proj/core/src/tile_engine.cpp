#include "mmstencil/tile_engine.hpp"

#include <ostream>
#include <stdexcept>
#include <string>

namespace mmstencil {

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::OuterProduct: return "outer_product";
    case OpKind::SliceLoad: return "slice_load";
    case OpKind::SliceStore: return "slice_store";
    case OpKind::VectorLoad: return "vector_load";
    case OpKind::VectorStore: return "vector_store";
    case OpKind::Prefetch: return "prefetch";
    case OpKind::Splice: return "splice";
    case OpKind::TileZero: return "tile_zero";
  }
  return "unknown";
}

const char* to_string(OpTag t) {
  switch (t) {
    case OpTag::None: return "none";
    case OpTag::Input: return "input";
    case OpTag::Scratch: return "scratch";
    case OpTag::Dest: return "dest";
    case OpTag::Coeff: return "coeff";
    case OpTag::BoxSegment: return "box_segment";
    case OpTag::Gather: return "gather";
    case OpTag::Transpose: return "transpose";
  }
  return "unknown";
}

void dump_trace_jsonl(const InstructionTrace& trace, std::ostream& os) {
  for (const auto& op : trace.ops) {
    os << "{\"kind\":\"" << to_string(op.kind) << "\"";
    if (op.tile != 0xff) os << ",\"tile\":" << int(op.tile);
    if (op.tag != OpTag::None) os << ",\"tag\":\"" << to_string(op.tag) << "\"";
    if (op.aux != 0) os << ",\"aux\":" << op.aux;
    if (op.addr != 0) os << ",\"addr\":" << op.addr;
    os << "}\n";
  }
}

InterleaveReport check_interleaving(const InstructionTrace& trace) {
  InterleaveReport r;
  std::uint64_t seen_tiles = 0;
  int run = 0;
  int prev_tile = -1;
  for (const auto& op : trace.ops) {
    if (op.kind != OpKind::OuterProduct) continue;
    ++r.outer_products;
    seen_tiles |= std::uint64_t(1) << (op.tile & 63);
    if (op.tile == prev_tile) {
      ++run;
    } else {
      run = 1;
      prev_tile = op.tile;
    }
    if (run > r.max_same_tile_run) r.max_same_tile_run = run;
  }
  for (int i = 0; i < 64; ++i) r.active_tiles += (seen_tiles >> i) & 1;
  r.compliant = r.max_same_tile_run <= 1;
  return r;
}

template <typename T>
TileEngine<T>::TileEngine(int vector_length, int tiles) : vl_(vector_length), tiles_(tiles) {
  if (vl_ < 1 || vl_ > kMaxVectorLanes)
    throw std::invalid_argument("vector length out of range: " + std::to_string(vl_));
  if (tiles_ < 1 || tiles_ > 64)
    throw std::invalid_argument("tile count out of range: " + std::to_string(tiles_));
  tiles_data_.assign(static_cast<std::size_t>(tiles_ + 1) * vl_ * vl_, T(0));
}

template <typename T>
void TileEngine<T>::check_tile(int t) const {
  if (t < 0 || t >= tiles_)
    throw std::invalid_argument("tile index out of range: " + std::to_string(t));
}

template <typename T>
void TileEngine<T>::zero_tile(int t) {
  check_tile(t);
  T* d = tile_data(t);
  for (int i = 0; i < vl_ * vl_; ++i) d[i] = T(0);
  trace_.ops.push_back({OpKind::TileZero, static_cast<std::uint8_t>(t), OpTag::None, 0, 0});
}

template <typename T>
void TileEngine<T>::outer_product(int t, const VectorReg<T>& col, const VectorReg<T>& row,
                                  LaneMask col_mask, LaneMask row_mask, OpTag tag,
                                  std::uint32_t aux) {
  check_tile(t);
  T* d = tile_data(t);
  for (int i = 0; i < vl_; ++i) {
    if (!((col_mask >> i) & 1)) continue;
    const T c = col.lane[i];
    T* drow = d + static_cast<std::size_t>(i) * vl_;
    for (int j = 0; j < vl_; ++j) {
      if (!((row_mask >> j) & 1)) continue;
      drow[j] = static_cast<T>(drow[j] + c * row.lane[j]);
    }
  }
  trace_.ops.push_back({OpKind::OuterProduct, static_cast<std::uint8_t>(t), tag, aux, 0});
}

template <typename T>
void TileEngine<T>::slice_insert(int t, int index, bool horizontal, const VectorReg<T>& v) {
  check_tile(t);
  if (index < 0 || index >= vl_)
    throw std::invalid_argument("slice index out of range: " + std::to_string(index));
  T* d = tile_data(t);
  if (horizontal) {
    for (int j = 0; j < vl_; ++j) d[static_cast<std::size_t>(index) * vl_ + j] = v.lane[j];
  } else {
    for (int i = 0; i < vl_; ++i) d[static_cast<std::size_t>(i) * vl_ + index] = v.lane[i];
  }
  trace_.ops.push_back({OpKind::SliceLoad, static_cast<std::uint8_t>(t), OpTag::None,
                        static_cast<std::uint32_t>(index), 0});
}

template <typename T>
VectorReg<T> TileEngine<T>::slice_extract(int t, int index, bool horizontal) {
  check_tile(t);
  if (index < 0 || index >= vl_)
    throw std::invalid_argument("slice index out of range: " + std::to_string(index));
  const T* d = tile_data(t);
  VectorReg<T> v;
  v.n = vl_;
  if (horizontal) {
    for (int j = 0; j < vl_; ++j) v.lane[j] = d[static_cast<std::size_t>(index) * vl_ + j];
  } else {
    for (int i = 0; i < vl_; ++i) v.lane[i] = d[static_cast<std::size_t>(i) * vl_ + index];
  }
  trace_.ops.push_back({OpKind::SliceStore, static_cast<std::uint8_t>(t), OpTag::None,
                        static_cast<std::uint32_t>(index), 0});
  return v;
}

template <typename T>
T TileEngine<T>::tile_value(int t, int i, int j) const {
  check_tile(t);
  if (i < 0 || i >= vl_ || j < 0 || j >= vl_)
    throw std::invalid_argument("tile element out of range");
  return tile_data(t)[static_cast<std::size_t>(i) * vl_ + j];
}

template <typename T>
VectorReg<T> TileEngine<T>::load_row(const T* base, std::int64_t first, std::int64_t limit,
                                     int lanes, OpTag tag, std::uint64_t addr,
                                     LaneMask* valid, std::uint32_t aux) {
  VectorReg<T> v;
  v.n = lanes;
  LaneMask m = 0;
  for (int j = 0; j < lanes; ++j) {
    const std::int64_t x = first + j;
    if (x >= 0 && x < limit) {
      v.lane[j] = base[x];
      m |= LaneMask(1) << j;
    } else {
      v.lane[j] = T(0);
    }
  }
  if (valid) *valid = m;
  trace_.ops.push_back({OpKind::VectorLoad, 0xff, tag, aux, addr});
  return v;
}

template <typename T>
VectorReg<T> TileEngine<T>::load_strided(const T* base, std::int64_t stride, int lanes,
                                         OpTag tag, std::uint64_t addr) {
  VectorReg<T> v;
  v.n = lanes;
  for (int j = 0; j < lanes; ++j) v.lane[j] = base[stride * j];
  trace_.ops.push_back({OpKind::VectorLoad, 0xff, tag, 0, addr});
  return v;
}

template <typename T>
void TileEngine<T>::store_row(T* dst, const VectorReg<T>& v, int lanes, OpTag tag,
                              std::uint64_t addr) {
  for (int j = 0; j < lanes; ++j) dst[j] = v.lane[j];
  trace_.ops.push_back({OpKind::VectorStore, 0xff, tag, 0, addr});
}

template <typename T>
void TileEngine<T>::prefetch(std::uint64_t addr, OpTag tag) {
  trace_.ops.push_back({OpKind::Prefetch, 0xff, tag, 0, addr});
}

template <typename T>
VectorReg<T> TileEngine<T>::splice(const VectorReg<T>& lo, const VectorReg<T>& hi, int shift,
                                   OpTag tag, std::uint32_t aux) {
  if (shift < 0 || shift > vl_)
    throw std::invalid_argument("splice shift out of range: " + std::to_string(shift));
  VectorReg<T> v;
  v.n = vl_;
  for (int j = 0; j < vl_; ++j) {
    const int s = shift + j;
    v.lane[j] = s < vl_ ? lo.lane[s] : hi.lane[s - vl_];
  }
  trace_.ops.push_back({OpKind::Splice, 0xff, tag, aux, 0});
  return v;
}

template <typename T>
void TileEngine<T>::transpose_block(const T* src, std::int64_t src_stride, T* dst,
                                    std::int64_t dst_stride) {
  const int stage = tiles_;  // staging tile, outside the accumulator set
  T* d = tiles_data_.data() + static_cast<std::size_t>(stage) * vl_ * vl_;
  for (int i = 0; i < vl_; ++i) {
    const T* srow = src + static_cast<std::size_t>(i) * src_stride;
    for (int j = 0; j < vl_; ++j) d[static_cast<std::size_t>(i) * vl_ + j] = srow[j];
    trace_.ops.push_back({OpKind::SliceLoad, static_cast<std::uint8_t>(stage), OpTag::Transpose,
                          static_cast<std::uint32_t>(i), 0});
  }
  for (int j = 0; j < vl_; ++j) {
    T* drow = dst + static_cast<std::size_t>(j) * dst_stride;
    for (int i = 0; i < vl_; ++i) drow[i] = d[static_cast<std::size_t>(i) * vl_ + j];
    trace_.ops.push_back({OpKind::SliceStore, static_cast<std::uint8_t>(stage), OpTag::Transpose,
                          static_cast<std::uint32_t>(j), 0});
  }
}

template class TileEngine<float>;
template class TileEngine<double>;

}  // namespace mmstencil
