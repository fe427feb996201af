#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "satori/box_geometry.hpp"

namespace satori::reward {

// Output orderings. BoxAnswerCaption permits stopping right after the
// answer tag at inference time.
enum class OutputMode { CaptionBoxAnswer, BoxAnswerCaption };

enum class Field { caption = 0, bbox = 1, answer = 2 };

std::array<Field, 3> canonical_order(OutputMode mode);

// "caption-first" / "bbox-first"
std::string_view mode_name(OutputMode mode);
std::optional<OutputMode> parse_mode(std::string_view name);

// Parsed <caption>/<bbox>/<answer> regions of a raw generation. Absent or
// malformed fields stay disengaged; parsing itself never fails.
struct StructuredOutput {
  std::optional<std::string> caption;
  std::optional<geom::BoxSet> boxes;
  std::optional<std::string> answer;
  std::vector<Field> ordering;        // first-occurrence order of found tag pairs
  std::array<int, 3> tag_counts{0, 0, 0};  // well-formed pair count per field
  std::string raw;
};

// Extracts the first well-formed region per tag; the bbox body must parse
// under the box-list grammar or the field is marked absent.
StructuredOutput parse_structured(std::string_view raw, OutputMode mode);

// Canonical rendering of the present fields in the mode's order.
std::string render_structured(const StructuredOutput& out, OutputMode mode);

// 1 iff all three fields are present, every tag pair occurs exactly once,
// and the observed order equals the mode's canonical order.
double format_reward(const StructuredOutput& out, OutputMode mode);

// Case-insensitive trimmed exact match; absent prediction scores 0.
double accuracy_reward(const std::optional<std::string>& predicted,
                       std::string_view gold);

// Gold annotations a rollout is scored against.
struct GoldAnnotation {
  std::string caption;
  geom::BoxSet boxes;
  std::string answer;
};

using Weights = std::array<double, 4>;  // caption, bbox, accuracy, format

inline constexpr Weights kEqualWeights{0.25, 0.25, 0.25, 0.25};
inline constexpr Weights kBboxOnlyWeights{0.0, 0.5, 0.25, 0.25};
inline constexpr Weights kAccuracyOnlyWeights{0.0, 0.0, 1.0, 0.0};

// "equal", "bbox-only", "accuracy-only"
std::optional<Weights> weight_preset(std::string_view name);

// Throws std::invalid_argument unless weights are nonnegative and sum to 1.
void validate_weights(const Weights& weights);

double weighted_total(const std::array<double, 4>& components,
                      const Weights& weights);

struct RewardBreakdown {
  double r_caption = 0.0;
  double r_bbox = 0.0;
  double r_acc = 0.0;
  double r_format = 0.0;
  Weights weights = kEqualWeights;
  double total = 0.0;

  std::array<double, 4> components() const {
    return {r_caption, r_bbox, r_acc, r_format};
  }
};

// Scores every component (absent caption/boxes score 0) and composes the
// weighted total. Rejects invalid weight vectors.
RewardBreakdown compose_reward(const StructuredOutput& out,
                               const GoldAnnotation& gold,
                               const Weights& weights, OutputMode mode);

}  // namespace satori::reward
