#include "satori/reward_engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "satori/text_metrics.hpp"

namespace satori::reward {

std::array<Field, 3> canonical_order(OutputMode mode) {
  if (mode == OutputMode::CaptionBoxAnswer) {
    return {Field::caption, Field::bbox, Field::answer};
  }
  return {Field::bbox, Field::answer, Field::caption};
}

std::string_view mode_name(OutputMode mode) {
  return mode == OutputMode::CaptionBoxAnswer ? "caption-first" : "bbox-first";
}

std::optional<OutputMode> parse_mode(std::string_view name) {
  if (name == "caption-first") return OutputMode::CaptionBoxAnswer;
  if (name == "bbox-first") return OutputMode::BoxAnswerCaption;
  return std::nullopt;
}

namespace {

constexpr std::array<std::string_view, 3> kTagNames{"caption", "bbox", "answer"};

struct TagScan {
  std::optional<std::string> first_body;
  std::size_t first_pos = std::string_view::npos;
  int count = 0;
};

// Non-overlapping scan for <tag>...</tag> pairs; keeps the first body.
TagScan scan_tag(std::string_view raw, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  TagScan scan;
  std::size_t pos = 0;
  while (true) {
    const std::size_t o = raw.find(open, pos);
    if (o == std::string_view::npos) break;
    const std::size_t b = o + open.size();
    const std::size_t c = raw.find(close, b);
    if (c == std::string_view::npos) break;
    if (scan.count == 0) {
      scan.first_body = std::string(raw.substr(b, c - b));
      scan.first_pos = o;
    }
    ++scan.count;
    pos = c + close.size();
  }
  return scan;
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

}  // namespace

StructuredOutput parse_structured(std::string_view raw, OutputMode mode) {
  (void)mode;  // parsing is mode-independent; the mode matters for scoring
  StructuredOutput out;
  out.raw = std::string(raw);

  std::array<TagScan, 3> scans;
  for (std::size_t f = 0; f < 3; ++f) {
    scans[f] = scan_tag(raw, kTagNames[f]);
    out.tag_counts[f] = scans[f].count;
  }

  if (scans[0].first_body) out.caption = *scans[0].first_body;
  if (scans[1].first_body) out.boxes = geom::parse_box_list(*scans[1].first_body);
  if (scans[2].first_body) out.answer = *scans[2].first_body;

  std::vector<std::pair<std::size_t, Field>> found;
  for (std::size_t f = 0; f < 3; ++f) {
    if (scans[f].count > 0) found.emplace_back(scans[f].first_pos, static_cast<Field>(f));
  }
  std::sort(found.begin(), found.end());
  for (const auto& [pos, field] : found) out.ordering.push_back(field);
  return out;
}

std::string render_structured(const StructuredOutput& out, OutputMode mode) {
  std::string rendered;
  for (Field f : canonical_order(mode)) {
    switch (f) {
      case Field::caption:
        if (out.caption) rendered += "<caption>" + *out.caption + "</caption>";
        break;
      case Field::bbox:
        if (out.boxes) rendered += "<bbox>" + geom::render_box_list(*out.boxes) + "</bbox>";
        break;
      case Field::answer:
        if (out.answer) rendered += "<answer>" + *out.answer + "</answer>";
        break;
    }
  }
  return rendered;
}

double format_reward(const StructuredOutput& out, OutputMode mode) {
  if (!out.caption || !out.boxes || !out.answer) return 0.0;
  if (out.tag_counts[0] != 1 || out.tag_counts[1] != 1 || out.tag_counts[2] != 1) {
    return 0.0;
  }
  const auto order = canonical_order(mode);
  if (out.ordering.size() != 3) return 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (out.ordering[i] != order[i]) return 0.0;
  }
  return 1.0;
}

double accuracy_reward(const std::optional<std::string>& predicted,
                       std::string_view gold) {
  if (!predicted) return 0.0;
  return lower(trim(*predicted)) == lower(trim(gold)) ? 1.0 : 0.0;
}

std::optional<Weights> weight_preset(std::string_view name) {
  if (name == "equal") return kEqualWeights;
  if (name == "bbox-only") return kBboxOnlyWeights;
  if (name == "accuracy-only") return kAccuracyOnlyWeights;
  return std::nullopt;
}

void validate_weights(const Weights& weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("reward weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("reward weights must sum to 1");
  }
}

double weighted_total(const std::array<double, 4>& components,
                      const Weights& weights) {
  double total = 0.0;
  for (std::size_t k = 0; k < 4; ++k) total += weights[k] * components[k];
  return total;
}

RewardBreakdown compose_reward(const StructuredOutput& out,
                               const GoldAnnotation& gold,
                               const Weights& weights, OutputMode mode) {
  validate_weights(weights);
  RewardBreakdown breakdown;
  breakdown.weights = weights;
  breakdown.r_caption =
      out.caption ? text::caption_reward(*out.caption, gold.caption) : 0.0;
  breakdown.r_bbox = out.boxes ? geom::union_iou(*out.boxes, gold.boxes) : 0.0;
  breakdown.r_acc = accuracy_reward(out.answer, gold.answer);
  breakdown.r_format = format_reward(out, mode);
  breakdown.total = weighted_total(breakdown.components(), weights);
  return breakdown;
}

}  // namespace satori::reward
