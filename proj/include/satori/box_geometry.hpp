#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace satori::geom {

// Axis-aligned rectangle with x1 < x2, y1 < y2 once validated.
struct Rect {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool operator==(const Rect&) const = default;
};

using BoxSet = std::vector<Rect>;

// Reorders swapped corners; rejects non-finite coordinates and zero-area
// boxes. Callers decide whether rejection drops the box or fails the input.
std::optional<Rect> normalize_rect(double x1, double y1, double x2, double y2);

// Enclosing rectangle of a point list given as x,y pairs (used to reduce
// four-point quadrilaterals to the two-corner form). Rejects degenerate hulls.
std::optional<Rect> enclosing_rect(std::span<const double> xy_pairs);

// Exact area of the union of the rectangles, by x-slab sweep over the
// compressed coordinate grid. 0 for an empty set.
double union_area(const BoxSet& boxes);

inline constexpr double kIouEpsilon = 1e-6;

// area(union(pred) ∩ union(gold)) / (area(union(pred) ∪ union(gold)) + eps).
// The epsilon keeps the value finite (and 0) when both sets are empty, and
// strictly below 1 always.
double union_iou(const BoxSet& pred, const BoxSet& gold);

// Textual grammar shared with the structured-output parser:
// [[x1,y1,x2,y2], ...] with decimal reals. Returns nullopt unless the body
// is a list of 4-number lists; entries rejected by normalize_rect are
// dropped from the result.
std::optional<BoxSet> parse_box_list(std::string_view body);

// Canonical rendering of the same grammar; round-trips through
// parse_box_list exactly.
std::string render_box_list(const BoxSet& boxes);

}  // namespace satori::geom
