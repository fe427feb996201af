#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "satori/box_geometry.hpp"

namespace satori::attn {

// Raw multi-layer multi-head attention over a token sequence, restricted to
// nonnegative weights. The visual span [visual_start, visual_end) reshapes
// to a grid_h x grid_w patch grid.
struct AttentionTensor {
  std::uint32_t layers = 0;
  std::uint32_t heads = 0;
  std::uint32_t answer_tokens = 0;
  std::uint32_t seq_len = 0;
  std::uint32_t visual_start = 0;
  std::uint32_t visual_end = 0;
  std::uint32_t grid_h = 0;
  std::uint32_t grid_w = 0;
  // layer-major, then head, then answer token, then sequence position
  std::vector<double> values;

  std::size_t index(std::uint32_t l, std::uint32_t k, std::uint32_t n,
                    std::uint32_t pos) const {
    return ((static_cast<std::size_t>(l) * heads + k) * answer_tokens + n) *
               seq_len +
           pos;
  }
  double at(std::uint32_t l, std::uint32_t k, std::uint32_t n,
            std::uint32_t pos) const {
    return values[index(l, k, n, pos)];
  }

  // Throws std::invalid_argument on inconsistent dims, a visual span that
  // does not match the grid, or negative values.
  void validate() const;
};

// Sum-normalized spatial attention distribution.
struct AttentionGrid {
  std::uint32_t h = 0;
  std::uint32_t w = 0;
  std::vector<double> cells;  // row-major

  double at(std::uint32_t i, std::uint32_t j) const { return cells[i * w + j]; }
};

struct PatchMask {
  std::uint32_t h = 0;
  std::uint32_t w = 0;
  std::vector<std::uint8_t> inside;  // row-major

  std::size_t marked_count() const;
};

// Crops to the visual span, reshapes each (layer, head, answer-token) slice
// to h x w, averages the slices and divides by the grand sum. Rejects an
// all-zero aggregate.
AttentionGrid aggregate(const AttentionTensor& tensor);

// Marks grid cells whose pixel rectangle intersects the box union with
// positive area. Cell (i, j) covers [j*W/w, (j+1)*W/w) x [i*H/h, (i+1)*H/h).
PatchMask boxes_to_mask(const geom::BoxSet& boxes, double image_w,
                        double image_h, std::uint32_t grid_h,
                        std::uint32_t grid_w);

// Region Attention Density: attention mass inside the mask over total mass.
double rad(const AttentionGrid& grid, const PatchMask& mask);

// Dump stream format: repeated records, each an 8 x uint32 little-endian
// header (layers, heads, answer_tokens, seq_len, visual_start, visual_end,
// grid_h, grid_w) followed by layers*heads*answer_tokens*seq_len float32
// little-endian values in the tensor's storage order.
void write_dump(std::ostream& os, const AttentionTensor& tensor);

// Reads records until EOF; throws std::runtime_error on truncated or
// inconsistent records.
std::vector<AttentionTensor> read_dump(std::istream& is);

}  // namespace satori::attn
