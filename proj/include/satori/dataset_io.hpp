#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "satori/box_geometry.hpp"

namespace satori::data {

// One verification record: (image, question, caption, box set, answer) plus
// provenance and taxonomy tags.
struct VerifySample {
  std::string image_ref;
  std::string question;
  std::string caption;
  geom::BoxSet boxes;
  std::string answer;
  std::string source;
  std::string category;
  std::string subtask;
};

// 3 categories and their 11 subtasks.
std::span<const std::string_view> categories();
std::span<const std::pair<std::string_view, std::string_view>> subtask_taxonomy();

struct LineDiagnostic {
  std::size_t line = 0;  // 1-based
  std::string message;
  bool warning = false;  // warnings keep the sample, errors drop the line
};

struct LoadResult {
  std::vector<VerifySample> samples;
  std::vector<LineDiagnostic> diagnostics;

  std::size_t error_count() const;
};

// Streaming JSONL reader. Malformed lines become diagnostics, never silent
// drops. Box entries may be 4 numbers (two corners) or 8 numbers (four
// points, reduced to the enclosing rectangle). Throws std::runtime_error
// when the stream holds no lines at all.
LoadResult load(std::istream& is);
LoadResult load_file(const std::string& path);  // also throws on unreadable files

std::string serialize_sample(const VerifySample& sample);

struct CaptionWordBounds {
  int lo = 10;
  int hi = 20;
};

struct VerifyOutcome {
  bool pass = true;
  std::vector<std::string> reasons;  // "bbox", "caption length", "answer"
};

// Verification checks: box IoU vs the reference annotation must reach 0.8
// (when a reference is given), caption word count must lie inside the
// bounds, the answer must be nonempty.
VerifyOutcome verify(const VerifySample& sample,
                     const std::optional<geom::BoxSet>& reference_boxes,
                     const CaptionWordBounds& bounds);

inline constexpr double kVerifyIouThreshold = 0.8;

// Caption length in words: tokenized with the caption metric tokenizer,
// punctuation tokens excluded.
int caption_word_count(std::string_view caption);

struct SourceStats {
  std::size_t count = 0;
  double avg_boxes = 0.0;
  double avg_caption_words = 0.0;
};

struct DatasetStats {
  std::size_t sample_count = 0;
  double avg_boxes_per_sample = 0.0;
  double avg_caption_words = 0.0;
  std::vector<std::pair<std::string, SourceStats>> per_source;  // sorted by source
};

// Exact means over the given samples; throws on an empty list.
DatasetStats stats(std::span<const VerifySample> samples);

}  // namespace satori::data
