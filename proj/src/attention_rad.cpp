#include "satori/attention_rad.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace satori::attn {

void AttentionTensor::validate() const {
  if (layers == 0 || heads == 0 || answer_tokens == 0 || seq_len == 0) {
    throw std::invalid_argument("attention tensor has a zero dimension");
  }
  if (visual_start >= visual_end || visual_end > seq_len) {
    throw std::invalid_argument("visual span must satisfy 0 <= start < end <= seq_len");
  }
  if (grid_h == 0 || grid_w == 0 ||
      static_cast<std::uint64_t>(grid_h) * grid_w != visual_end - visual_start) {
    throw std::invalid_argument("visual span length must equal grid_h * grid_w");
  }
  const std::size_t expected = static_cast<std::size_t>(layers) * heads *
                               answer_tokens * seq_len;
  if (values.size() != expected) {
    throw std::invalid_argument("attention value count does not match dims");
  }
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("attention values must be finite and >= 0");
    }
  }
}

std::size_t PatchMask::marked_count() const {
  std::size_t count = 0;
  for (std::uint8_t m : inside) count += m != 0;
  return count;
}

AttentionGrid aggregate(const AttentionTensor& tensor) {
  tensor.validate();
  const std::size_t span = tensor.visual_end - tensor.visual_start;
  std::vector<double> sum(span, 0.0);
  for (std::uint32_t l = 0; l < tensor.layers; ++l) {
    for (std::uint32_t k = 0; k < tensor.heads; ++k) {
      for (std::uint32_t n = 0; n < tensor.answer_tokens; ++n) {
        const std::size_t base = tensor.index(l, k, n, tensor.visual_start);
        for (std::size_t p = 0; p < span; ++p) sum[p] += tensor.values[base + p];
      }
    }
  }
  const double slices = static_cast<double>(tensor.layers) * tensor.heads *
                        tensor.answer_tokens;
  double grand = 0.0;
  for (double& v : sum) {
    v /= slices;
    grand += v;
  }
  if (grand <= 0.0) {
    throw std::invalid_argument("all-zero attention aggregate cannot be normalized");
  }
  for (double& v : sum) v /= grand;

  AttentionGrid grid;
  grid.h = tensor.grid_h;
  grid.w = tensor.grid_w;
  grid.cells = std::move(sum);
  return grid;
}

PatchMask boxes_to_mask(const geom::BoxSet& boxes, double image_w,
                        double image_h, std::uint32_t grid_h,
                        std::uint32_t grid_w) {
  if (!(image_w > 0.0) || !(image_h > 0.0)) {
    throw std::invalid_argument("image size must be positive");
  }
  if (grid_h == 0 || grid_w == 0) {
    throw std::invalid_argument("grid dims must be positive");
  }
  PatchMask mask;
  mask.h = grid_h;
  mask.w = grid_w;
  mask.inside.assign(static_cast<std::size_t>(grid_h) * grid_w, 0);
  for (std::uint32_t i = 0; i < grid_h; ++i) {
    const double cy1 = image_h * i / grid_h;
    const double cy2 = image_h * (i + 1) / grid_h;
    for (std::uint32_t j = 0; j < grid_w; ++j) {
      const double cx1 = image_w * j / grid_w;
      const double cx2 = image_w * (j + 1) / grid_w;
      for (const geom::Rect& r : boxes) {
        if (std::min(cx2, r.x2) > std::max(cx1, r.x1) &&
            std::min(cy2, r.y2) > std::max(cy1, r.y1)) {
          mask.inside[static_cast<std::size_t>(i) * grid_w + j] = 1;
          break;
        }
      }
    }
  }
  return mask;
}

double rad(const AttentionGrid& grid, const PatchMask& mask) {
  if (grid.h != mask.h || grid.w != mask.w) {
    throw std::invalid_argument("grid and mask dims must match");
  }
  double inside = 0.0, total = 0.0;
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    total += grid.cells[c];
    if (mask.inside[c]) inside += grid.cells[c];
  }
  if (total <= 0.0) {
    throw std::invalid_argument("attention grid has no mass");
  }
  return inside / total;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "dump IO assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

bool get_u32(std::istream& is, std::uint32_t& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return is.gcount() == sizeof v;
}

}  // namespace

void write_dump(std::ostream& os, const AttentionTensor& tensor) {
  tensor.validate();
  put_u32(os, tensor.layers);
  put_u32(os, tensor.heads);
  put_u32(os, tensor.answer_tokens);
  put_u32(os, tensor.seq_len);
  put_u32(os, tensor.visual_start);
  put_u32(os, tensor.visual_end);
  put_u32(os, tensor.grid_h);
  put_u32(os, tensor.grid_w);
  for (double v : tensor.values) {
    const float f = static_cast<float>(v);
    os.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
  if (!os) throw std::runtime_error("attention dump write failed");
}

std::vector<AttentionTensor> read_dump(std::istream& is) {
  std::vector<AttentionTensor> tensors;
  while (true) {
    std::uint32_t header[8];
    if (!get_u32(is, header[0])) {
      if (is.eof()) break;
      throw std::runtime_error("attention dump read failed");
    }
    for (int f = 1; f < 8; ++f) {
      if (!get_u32(is, header[f])) {
        throw std::runtime_error("attention dump: truncated header");
      }
    }
    AttentionTensor tensor;
    tensor.layers = header[0];
    tensor.heads = header[1];
    tensor.answer_tokens = header[2];
    tensor.seq_len = header[3];
    tensor.visual_start = header[4];
    tensor.visual_end = header[5];
    tensor.grid_h = header[6];
    tensor.grid_w = header[7];

    const std::uint64_t count = static_cast<std::uint64_t>(tensor.layers) *
                                tensor.heads * tensor.answer_tokens *
                                tensor.seq_len;
    if (count == 0 || count > (1ull << 31)) {
      throw std::runtime_error("attention dump: implausible header dims");
    }
    std::vector<float> raw(count);
    is.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (is.gcount() != static_cast<std::streamsize>(count * sizeof(float))) {
      throw std::runtime_error("attention dump: truncated payload");
    }
    tensor.values.assign(raw.begin(), raw.end());
    try {
      tensor.validate();
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(std::string("attention dump: ") + e.what());
    }
    tensors.push_back(std::move(tensor));
  }
  return tensors;
}

}  // namespace satori::attn
