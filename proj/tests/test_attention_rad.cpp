#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "satori/attention_rad.hpp"
#include "satori/rng.hpp"

using namespace satori;
using attn::AttentionGrid;
using attn::AttentionTensor;
using attn::PatchMask;

namespace {

AttentionTensor make_tensor(std::uint32_t layers, std::uint32_t heads,
                            std::uint32_t answers, std::uint32_t h, std::uint32_t w,
                            std::uint32_t text_tokens) {
  AttentionTensor t;
  t.layers = layers;
  t.heads = heads;
  t.answer_tokens = answers;
  t.visual_start = 0;
  t.visual_end = h * w;
  t.seq_len = h * w + text_tokens;
  t.grid_h = h;
  t.grid_w = w;
  t.values.assign(static_cast<std::size_t>(layers) * heads * answers * t.seq_len, 0.0);
  return t;
}

AttentionTensor random_tensor(Rng& rng, std::uint32_t layers, std::uint32_t heads,
                              std::uint32_t answers, std::uint32_t h, std::uint32_t w,
                              std::uint32_t text_tokens) {
  AttentionTensor t = make_tensor(layers, heads, answers, h, w, text_tokens);
  for (double& v : t.values) v = rng.next_double();
  return t;
}

}  // namespace

TEST_CASE("aggregate of a uniform tensor is the uniform grid") {
  AttentionTensor t = make_tensor(3, 2, 2, 4, 4, 5);
  for (double& v : t.values) v = 0.125;
  const AttentionGrid grid = attn::aggregate(t);
  for (double c : grid.cells) CHECK(c == doctest::Approx(1.0 / 16.0).epsilon(1e-12));
}

TEST_CASE("aggregate with a single slice is a normalized reshape") {
  Rng rng(0xa11);
  AttentionTensor t = random_tensor(rng, 1, 1, 1, 2, 3, 4);
  const AttentionGrid grid = attn::aggregate(t);
  double span_sum = 0.0;
  for (std::uint32_t p = t.visual_start; p < t.visual_end; ++p) {
    span_sum += t.values[p];
  }
  for (std::uint32_t p = 0; p < 6; ++p) {
    CHECK(grid.cells[p] ==
          doctest::Approx(t.values[t.visual_start + p] / span_sum).epsilon(1e-12));
  }
}

TEST_CASE("aggregate matches the quadruple-loop oracle") {
  Rng rng(0xa22);
  for (int iter = 0; iter < 20; ++iter) {
    const AttentionTensor t = random_tensor(rng, 2, 2, 2, 2, 2, 3);
    const AttentionGrid grid = attn::aggregate(t);
    const AttentionGrid ref = oracle::ref_aggregate(t);
    double sum = 0.0;
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
      CHECK(grid.cells[c] == doctest::Approx(ref.cells[c]).epsilon(1e-12));
      sum += grid.cells[c];
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("aggregate is invariant to positive rescaling and rejects zeros") {
  Rng rng(0xa33);
  AttentionTensor t = random_tensor(rng, 2, 3, 1, 3, 3, 2);
  const AttentionGrid grid = attn::aggregate(t);
  AttentionTensor scaled = t;
  for (double& v : scaled.values) v *= 37.5;
  const AttentionGrid scaled_grid = attn::aggregate(scaled);
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    CHECK(grid.cells[c] == doctest::Approx(scaled_grid.cells[c]).epsilon(1e-12));
  }

  AttentionTensor zeros = make_tensor(1, 1, 1, 2, 2, 1);
  CHECK_THROWS_AS(attn::aggregate(zeros), std::invalid_argument);

  AttentionTensor bad = t;
  bad.grid_w += 1;  // span no longer equals h*w
  CHECK_THROWS_AS(attn::aggregate(bad), std::invalid_argument);
}

TEST_CASE("boxes_to_mask marks any positive-overlap cells") {
  const auto full = attn::boxes_to_mask({geom::Rect{0, 0, 64, 64}}, 64, 64, 4, 4);
  CHECK(full.marked_count() == 16);

  const auto none = attn::boxes_to_mask({}, 64, 64, 4, 4);
  CHECK(none.marked_count() == 0);

  // box exactly covering the top-left quadrant of a 4x4 grid over 64x64
  const auto quadrant = attn::boxes_to_mask({geom::Rect{0, 0, 32, 32}}, 64, 64, 4, 4);
  CHECK(quadrant.marked_count() == 4);
  for (std::uint32_t i = 0; i < 4; ++i) {
    for (std::uint32_t j = 0; j < 4; ++j) {
      CHECK(quadrant.inside[i * 4 + j] == ((i < 2 && j < 2) ? 1 : 0));
    }
  }

  // sliver overlapping one row of cells
  const auto sliver = attn::boxes_to_mask({geom::Rect{0, 0, 64, 1}}, 64, 64, 4, 4);
  CHECK(sliver.marked_count() == 4);
}

TEST_CASE("rad on known grids") {
  AttentionGrid uniform;
  uniform.h = 4;
  uniform.w = 4;
  uniform.cells.assign(16, 1.0 / 16.0);

  PatchMask mask;
  mask.h = 4;
  mask.w = 4;
  mask.inside.assign(16, 0);
  for (int c : {0, 3, 9, 14}) mask.inside[c] = 1;
  CHECK(attn::rad(uniform, mask) == doctest::Approx(0.25).epsilon(1e-12));

  PatchMask full = mask;
  full.inside.assign(16, 1);
  CHECK(attn::rad(uniform, full) == doctest::Approx(1.0).epsilon(1e-12));

  PatchMask empty = mask;
  empty.inside.assign(16, 0);
  CHECK(attn::rad(uniform, empty) == 0.0);

  AttentionGrid inside_only = uniform;
  inside_only.cells.assign(16, 0.0);
  inside_only.cells[3] = 0.7;
  inside_only.cells[9] = 0.3;
  CHECK(attn::rad(inside_only, mask) == doctest::Approx(1.0).epsilon(1e-12));

  PatchMask wrong;
  wrong.h = 2;
  wrong.w = 2;
  wrong.inside.assign(4, 1);
  CHECK_THROWS_AS(attn::rad(uniform, wrong), std::invalid_argument);
}

TEST_CASE("rad equals direct summation on random inputs") {
  Rng rng(0xa44);
  for (int iter = 0; iter < 100; ++iter) {
    const std::uint32_t h = 2 + static_cast<std::uint32_t>(rng.below(6));
    const std::uint32_t w = 2 + static_cast<std::uint32_t>(rng.below(6));
    AttentionGrid grid;
    grid.h = h;
    grid.w = w;
    grid.cells.resize(static_cast<std::size_t>(h) * w);
    for (double& c : grid.cells) c = rng.next_double() + 1e-6;
    PatchMask mask;
    mask.h = h;
    mask.w = w;
    mask.inside.resize(grid.cells.size());
    for (auto& m : mask.inside) m = rng.below(2);

    double inside = 0.0, total = 0.0;
    for (std::size_t c = 0; c < grid.cells.size(); ++c) {
      total += grid.cells[c];
      if (mask.inside[c]) inside += grid.cells[c];
    }
    CHECK(attn::rad(grid, mask) == doctest::Approx(inside / total).epsilon(1e-12));
  }
}

TEST_CASE("moving mass into the mask strictly increases rad") {
  Rng rng(0xa55);
  for (int iter = 0; iter < 200; ++iter) {
    AttentionGrid grid;
    grid.h = 4;
    grid.w = 4;
    grid.cells.resize(16);
    for (double& c : grid.cells) c = rng.next_double() + 0.05;
    PatchMask mask;
    mask.h = 4;
    mask.w = 4;
    mask.inside.assign(16, 0);
    const std::size_t target = rng.below(16);
    mask.inside[target] = 1;
    std::size_t source = rng.below(16);
    while (source == target) source = rng.below(16);

    const double before = attn::rad(grid, mask);
    const double delta = grid.cells[source] * 0.5;
    grid.cells[source] -= delta;
    grid.cells[target] += delta;
    CHECK(attn::rad(grid, mask) > before);
  }
}

TEST_CASE("dump round-trips through the binary format") {
  Rng rng(0xd0);
  std::vector<AttentionTensor> tensors;
  tensors.push_back(random_tensor(rng, 2, 2, 1, 3, 2, 4));
  tensors.push_back(random_tensor(rng, 1, 3, 2, 2, 2, 1));
  // float32 payload: keep values representable
  for (auto& t : tensors) {
    for (double& v : t.values) v = static_cast<double>(static_cast<float>(v));
  }

  std::stringstream stream(std::ios::in | std::ios::out | std::ios::binary);
  for (const auto& t : tensors) attn::write_dump(stream, t);

  const auto loaded = attn::read_dump(stream);
  REQUIRE(loaded.size() == 2);
  for (std::size_t s = 0; s < 2; ++s) {
    CHECK(loaded[s].layers == tensors[s].layers);
    CHECK(loaded[s].heads == tensors[s].heads);
    CHECK(loaded[s].answer_tokens == tensors[s].answer_tokens);
    CHECK(loaded[s].seq_len == tensors[s].seq_len);
    CHECK(loaded[s].visual_start == tensors[s].visual_start);
    CHECK(loaded[s].visual_end == tensors[s].visual_end);
    CHECK(loaded[s].grid_h == tensors[s].grid_h);
    CHECK(loaded[s].grid_w == tensors[s].grid_w);
    CHECK(loaded[s].values == tensors[s].values);
  }
}

TEST_CASE("dump reader rejects malformed streams") {
  Rng rng(0xd1);
  const AttentionTensor t = random_tensor(rng, 1, 1, 1, 2, 2, 1);
  std::stringstream stream(std::ios::in | std::ios::out | std::ios::binary);
  attn::write_dump(stream, t);
  std::string bytes = stream.str();

  // truncated payload
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3),
                              std::ios::in | std::ios::binary);
  CHECK_THROWS_AS(attn::read_dump(truncated), std::runtime_error);

  // header whose visual span disagrees with the grid
  bytes[24] = 5;  // grid_h low byte
  std::stringstream inconsistent(bytes, std::ios::in | std::ios::binary);
  CHECK_THROWS_AS(attn::read_dump(inconsistent), std::runtime_error);
}
