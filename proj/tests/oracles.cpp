#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "satori/rng.hpp"

namespace oracle {

namespace {

using satori::geom::BoxSet;
using satori::geom::Rect;

struct CellRange {
  long lo;
  long hi;  // inclusive; empty if lo > hi
};

// Cell indices whose centers (i + 0.5) * res fall strictly inside [a, b).
CellRange cells_inside(double a, double b, double res) {
  const long lo = static_cast<long>(std::floor(a / res - 0.5)) + 1;
  const long hi = static_cast<long>(std::ceil(b / res - 0.5)) - 1;
  return {lo, hi};
}

// Collapses cell ranges into disjoint sorted form in place.
void merge_ranges(std::vector<CellRange>& ranges) {
  if (ranges.empty()) return;
  std::sort(ranges.begin(), ranges.end(),
            [](const CellRange& x, const CellRange& y) { return x.lo < y.lo; });
  std::size_t out = 0;
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].lo > ranges[out].hi + 1) {
      ranges[++out] = ranges[i];
    } else {
      ranges[out].hi = std::max(ranges[out].hi, ranges[i].hi);
    }
  }
  ranges.resize(out + 1);
}

long merged_count(std::vector<CellRange>& ranges) {
  merge_ranges(ranges);
  long count = 0;
  for (const CellRange& r : ranges) count += r.hi - r.lo + 1;
  return count;
}

long intersect_count(std::vector<CellRange>& a, std::vector<CellRange>& b) {
  if (a.empty() || b.empty()) return 0;
  merge_ranges(a);
  merge_ranges(b);
  long count = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const long lo = std::max(a[i].lo, b[j].lo);
    const long hi = std::min(a[i].hi, b[j].hi);
    if (hi >= lo) count += hi - lo + 1;
    if (a[i].hi < b[j].hi) {
      ++i;
    } else {
      ++j;
    }
  }
  return count;
}

void row_ranges(const BoxSet& boxes, long row, double res,
                std::vector<CellRange>& out) {
  out.clear();
  const double cy = (static_cast<double>(row) + 0.5) * res;
  for (const Rect& r : boxes) {
    if (cy > r.y1 && cy < r.y2) {
      const CellRange cols = cells_inside(r.x1, r.x2, res);
      if (cols.lo <= cols.hi) out.push_back(cols);
    }
  }
}

}  // namespace

OracleResult raster_iou(const BoxSet& pred, const BoxSet& gold, double resolution) {
  OracleResult result;
  result.resolution_or_draws = resolution;

  double ymin = 0.0, ymax = 0.0, perimeter = 0.0;
  bool any = false;
  for (const BoxSet* set : {&pred, &gold}) {
    for (const Rect& r : *set) {
      if (!any) {
        ymin = r.y1;
        ymax = r.y2;
        any = true;
      }
      ymin = std::min(ymin, r.y1);
      ymax = std::max(ymax, r.y2);
      perimeter += 2.0 * (r.width() + r.height());
    }
  }
  if (!any) {
    result.value = 0.0;
    result.tolerance = 0.0;
    return result;
  }

  const CellRange rows = cells_inside(ymin, ymax, resolution);
  long count_p = 0, count_g = 0, count_both = 0;
  std::vector<CellRange> rp, rg;
  for (long row = rows.lo; row <= rows.hi; ++row) {
    row_ranges(pred, row, resolution, rp);
    row_ranges(gold, row, resolution, rg);
    auto rp_copy = rp;
    auto rg_copy = rg;
    count_p += merged_count(rp_copy);
    count_g += merged_count(rg_copy);
    count_both += intersect_count(rp, rg);
  }
  const long count_union = count_p + count_g - count_both;
  result.value = count_union == 0
                     ? 0.0
                     : static_cast<double>(count_both) / static_cast<double>(count_union);
  const double union_area = static_cast<double>(count_union) * resolution * resolution;
  result.tolerance =
      union_area > 0.0 ? perimeter * resolution / union_area : resolution;
  return result;
}

double raster_union_area(const BoxSet& boxes, double resolution) {
  if (boxes.empty()) return 0.0;
  double ymin = boxes[0].y1, ymax = boxes[0].y2;
  for (const Rect& r : boxes) {
    ymin = std::min(ymin, r.y1);
    ymax = std::max(ymax, r.y2);
  }
  const CellRange rows = cells_inside(ymin, ymax, resolution);
  long covered = 0;
  std::vector<CellRange> ranges;
  for (long row = rows.lo; row <= rows.hi; ++row) {
    row_ranges(boxes, row, resolution, ranges);
    covered += merged_count(ranges);
  }
  return static_cast<double>(covered) * resolution * resolution;
}

OracleResult mc_weighted_variance(std::span<const double> vars,
                                  const std::vector<std::vector<double>>& corr,
                                  std::span<const double> weights,
                                  std::size_t draws, std::uint64_t seed) {
  const std::size_t k = vars.size();
  if (corr.size() != k || weights.size() != k) {
    throw std::invalid_argument("mc_weighted_variance dims disagree");
  }
  // covariance from correlation, then Cholesky (failure <=> not PSD)
  std::vector<std::vector<double>> cov(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      cov[i][j] = corr[i][j] * std::sqrt(vars[i] * vars[j]);
    }
  }
  std::vector<std::vector<double>> chol(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = cov[i][j];
      for (std::size_t m = 0; m < j; ++m) sum -= chol[i][m] * chol[j][m];
      if (i == j) {
        if (sum < -1e-12) throw std::invalid_argument("correlation matrix not PSD");
        chol[i][i] = std::sqrt(std::max(sum, 0.0));
      } else {
        chol[i][j] = chol[j][j] > 0.0 ? sum / chol[j][j] : 0.0;
      }
    }
  }

  satori::Rng rng(seed);
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> z(k);
  for (std::size_t d = 0; d < draws; ++d) {
    for (double& v : z) v = rng.normal();
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      double xi = 0.0;
      for (std::size_t j = 0; j <= i; ++j) xi += chol[i][j] * z[j];
      s += weights[i] * xi;
    }
    sum += s;
    sum_sq += s * s;
  }
  const double n = static_cast<double>(draws);
  const double mean = sum / n;
  OracleResult result;
  result.value = sum_sq / n - mean * mean;
  result.resolution_or_draws = n;
  result.tolerance = 4.0 * (result.value + 1e-12) * std::sqrt(2.0 / n);
  return result;
}

namespace {

std::vector<std::string> joined_ngrams(const satori::text::TokenSeq& toks,
                                       std::size_t n) {
  std::vector<std::string> grams;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string g;
    for (std::size_t k = 0; k < n; ++k) g += toks[i + k] + "\x1e";
    grams.push_back(std::move(g));
  }
  return grams;
}

}  // namespace

double ref_bleu4(const satori::text::TokenSeq& candidate,
                 const satori::text::TokenSeq& reference) {
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = joined_ngrams(candidate, n);
    const auto ref = joined_ngrams(reference, n);
    std::map<std::string, long> available;
    for (const auto& g : ref) ++available[g];
    long matched = 0;
    for (const auto& g : cand) {
      auto it = available.find(g);
      if (it != available.end() && it->second > 0) {
        --it->second;
        ++matched;
      }
    }
    log_sum += std::log((static_cast<double>(matched) + 1.0) /
                        (static_cast<double>(cand.size()) + 1.0));
  }
  double brevity = 1.0;
  if (candidate.size() < reference.size()) {
    brevity = std::exp(1.0 - static_cast<double>(reference.size()) /
                                 static_cast<double>(candidate.size()));
  }
  return brevity * std::exp(log_sum / 4.0);
}

namespace {

int lcs_memo(const satori::text::TokenSeq& a, const satori::text::TokenSeq& b,
             std::size_t i, std::size_t j, std::vector<int>& memo) {
  if (i == a.size() || j == b.size()) return 0;
  int& slot = memo[i * b.size() + j];
  if (slot >= 0) return slot;
  if (a[i] == b[j]) {
    slot = 1 + lcs_memo(a, b, i + 1, j + 1, memo);
  } else {
    slot = std::max(lcs_memo(a, b, i + 1, j, memo), lcs_memo(a, b, i, j + 1, memo));
  }
  return slot;
}

}  // namespace

int ref_lcs(const satori::text::TokenSeq& a, const satori::text::TokenSeq& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<int> memo(a.size() * b.size(), -1);
  return lcs_memo(a, b, 0, 0, memo);
}

double ref_rouge_l(const satori::text::TokenSeq& candidate,
                   const satori::text::TokenSeq& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const double lcs = ref_lcs(candidate, reference);
  // F1 with beta = 1 collapses to 2L / (|c| + |r|)
  return 2.0 * lcs / static_cast<double>(candidate.size() + reference.size());
}

satori::attn::AttentionGrid ref_aggregate(const satori::attn::AttentionTensor& tensor) {
  const std::uint32_t h = tensor.grid_h, w = tensor.grid_w;
  std::vector<double> grid(static_cast<std::size_t>(h) * w, 0.0);
  for (std::uint32_t l = 0; l < tensor.layers; ++l) {
    for (std::uint32_t k = 0; k < tensor.heads; ++k) {
      for (std::uint32_t n = 0; n < tensor.answer_tokens; ++n) {
        for (std::uint32_t i = 0; i < h; ++i) {
          for (std::uint32_t j = 0; j < w; ++j) {
            grid[static_cast<std::size_t>(i) * w + j] +=
                tensor.at(l, k, n, tensor.visual_start + i * w + j);
          }
        }
      }
    }
  }
  const double slices =
      static_cast<double>(tensor.layers) * tensor.heads * tensor.answer_tokens;
  double total = 0.0;
  for (double& v : grid) {
    v /= slices;
    total += v;
  }
  for (double& v : grid) v /= total;
  satori::attn::AttentionGrid out;
  out.h = h;
  out.w = w;
  out.cells = std::move(grid);
  return out;
}

std::vector<std::vector<double>> ref_population_cov(
    const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  const std::size_t k = rows.front().size();
  std::vector<double> mean(k, 0.0);
  std::vector<std::vector<double>> raw(k, std::vector<double>(k, 0.0));
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < k; ++i) {
      mean[i] += row[i];
      for (std::size_t j = 0; j < k; ++j) raw[i][j] += row[i] * row[j];
    }
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<std::vector<double>> cov(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      cov[i][j] = raw[i][j] / static_cast<double>(n) - mean[i] * mean[j];
    }
  }
  return cov;
}

std::vector<double> finite_difference(const std::function<double()>& f,
                                      std::span<double> params,
                                      std::span<const std::size_t> coords,
                                      double step) {
  std::vector<double> grads;
  grads.reserve(coords.size());
  for (std::size_t c : coords) {
    const double saved = params[c];
    params[c] = saved + step;
    const double plus = f();
    params[c] = saved - step;
    const double minus = f();
    params[c] = saved;
    grads.push_back((plus - minus) / (2.0 * step));
  }
  return grads;
}

}  // namespace oracle
