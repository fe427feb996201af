#include "satori/box_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "json.hpp"

namespace satori::geom {

std::optional<Rect> normalize_rect(double x1, double y1, double x2, double y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) ||
      !std::isfinite(y2)) {
    return std::nullopt;
  }
  if (x1 > x2) std::swap(x1, x2);
  if (y1 > y2) std::swap(y1, y2);
  if (x1 == x2 || y1 == y2) return std::nullopt;
  return Rect{x1, y1, x2, y2};
}

std::optional<Rect> enclosing_rect(std::span<const double> xy_pairs) {
  if (xy_pairs.size() < 4 || xy_pairs.size() % 2 != 0) return std::nullopt;
  double xmin = xy_pairs[0], xmax = xy_pairs[0];
  double ymin = xy_pairs[1], ymax = xy_pairs[1];
  for (std::size_t i = 0; i < xy_pairs.size(); i += 2) {
    if (!std::isfinite(xy_pairs[i]) || !std::isfinite(xy_pairs[i + 1])) {
      return std::nullopt;
    }
    xmin = std::min(xmin, xy_pairs[i]);
    xmax = std::max(xmax, xy_pairs[i]);
    ymin = std::min(ymin, xy_pairs[i + 1]);
    ymax = std::max(ymax, xy_pairs[i + 1]);
  }
  return normalize_rect(xmin, ymin, xmax, ymax);
}

namespace {

struct Interval {
  double lo;
  double hi;
};

// Collapses intervals into disjoint sorted form in place.
void merge_intervals(std::vector<Interval>& iv) {
  if (iv.empty()) return;
  std::sort(iv.begin(), iv.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::size_t out = 0;
  for (std::size_t i = 1; i < iv.size(); ++i) {
    if (iv[i].lo > iv[out].hi) {
      iv[++out] = iv[i];
    } else {
      iv[out].hi = std::max(iv[out].hi, iv[i].hi);
    }
  }
  iv.resize(out + 1);
}

double merged_length(std::vector<Interval>& iv) {
  merge_intervals(iv);
  double len = 0.0;
  for (const Interval& v : iv) len += v.hi - v.lo;
  return len;
}

// Length of the intersection of two interval unions; merges both sides
// first so the two-pointer walk sees disjoint intervals.
double intersection_length(std::vector<Interval>& a, std::vector<Interval>& b) {
  if (a.empty() || b.empty()) return 0.0;
  merge_intervals(a);
  merge_intervals(b);
  double len = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].lo, b[j].lo);
    const double hi = std::min(a[i].hi, b[j].hi);
    if (hi > lo) len += hi - lo;
    if (a[i].hi < b[j].hi) {
      ++i;
    } else {
      ++j;
    }
  }
  return len;
}

}  // namespace

double union_area(const BoxSet& boxes) {
  if (boxes.empty()) return 0.0;
  std::vector<double> xs;
  xs.reserve(boxes.size() * 2);
  for (const Rect& r : boxes) {
    xs.push_back(r.x1);
    xs.push_back(r.x2);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  double area = 0.0;
  std::vector<Interval> ys;
  for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
    const double xa = xs[s], xb = xs[s + 1];
    ys.clear();
    for (const Rect& r : boxes) {
      if (r.x1 <= xa && r.x2 >= xb) ys.push_back({r.y1, r.y2});
    }
    area += (xb - xa) * merged_length(ys);
  }
  return area;
}

double union_iou(const BoxSet& pred, const BoxSet& gold) {
  std::vector<double> xs;
  xs.reserve((pred.size() + gold.size()) * 2);
  for (const Rect& r : pred) {
    xs.push_back(r.x1);
    xs.push_back(r.x2);
  }
  for (const Rect& r : gold) {
    xs.push_back(r.x1);
    xs.push_back(r.x2);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  double inter = 0.0, both = 0.0;
  std::vector<Interval> yp, yg, yu;
  for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
    const double xa = xs[s], xb = xs[s + 1];
    yp.clear();
    yg.clear();
    yu.clear();
    for (const Rect& r : pred) {
      if (r.x1 <= xa && r.x2 >= xb) {
        yp.push_back({r.y1, r.y2});
        yu.push_back({r.y1, r.y2});
      }
    }
    for (const Rect& r : gold) {
      if (r.x1 <= xa && r.x2 >= xb) {
        yg.push_back({r.y1, r.y2});
        yu.push_back({r.y1, r.y2});
      }
    }
    const double w = xb - xa;
    inter += w * intersection_length(yp, yg);
    both += w * merged_length(yu);
  }
  return inter / (both + kIouEpsilon);
}

std::optional<BoxSet> parse_box_list(std::string_view body) {
  const nlohmann::json parsed =
      nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded() || !parsed.is_array()) return std::nullopt;
  BoxSet boxes;
  for (const auto& entry : parsed) {
    if (!entry.is_array() || entry.size() != 4) return std::nullopt;
    double c[4];
    for (std::size_t k = 0; k < 4; ++k) {
      if (!entry[k].is_number()) return std::nullopt;
      c[k] = entry[k].get<double>();
    }
    if (auto rect = normalize_rect(c[0], c[1], c[2], c[3])) {
      boxes.push_back(*rect);
    }
  }
  return boxes;
}

std::string render_box_list(const BoxSet& boxes) {
  nlohmann::json out = nlohmann::json::array();
  for (const Rect& r : boxes) {
    out.push_back({r.x1, r.y1, r.x2, r.y2});
  }
  return out.dump();
}

}  // namespace satori::geom
