#include "satori/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "satori/text_metrics.hpp"

namespace satori::data {

namespace {

constexpr std::array<std::string_view, 3> kCategories{"Perception", "Reasoning",
                                                      "Multilingual"};

constexpr std::array<std::pair<std::string_view, std::string_view>, 11> kSubtasks{{
    {"Perception", "Document Text Recognition"},
    {"Perception", "Scene Text Recognition"},
    {"Perception", "Object Recognition and Detection"},
    {"Reasoning", "Scene Text-based VQA"},
    {"Reasoning", "Text Description Generation"},
    {"Reasoning", "Document Understanding"},
    {"Reasoning", "Infographic Understanding"},
    {"Reasoning", "General VQA"},
    {"Reasoning", "Spatial and Relational Reasoning"},
    {"Multilingual", "Chinese Text Detection"},
    {"Multilingual", "Multilingual Text Detection"},
}};

bool known_category(std::string_view category) {
  return std::find(kCategories.begin(), kCategories.end(), category) !=
         kCategories.end();
}

bool known_subtask(std::string_view category, std::string_view subtask) {
  for (const auto& [cat, sub] : kSubtasks) {
    if (cat == category && sub == subtask) return true;
  }
  return false;
}

std::optional<std::string> get_string(const nlohmann::json& record,
                                      const char* key) {
  const auto it = record.find(key);
  if (it == record.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

}  // namespace

std::span<const std::string_view> categories() { return kCategories; }

std::span<const std::pair<std::string_view, std::string_view>> subtask_taxonomy() {
  return kSubtasks;
}

std::size_t LoadResult::error_count() const {
  std::size_t count = 0;
  for (const LineDiagnostic& d : diagnostics) count += !d.warning;
  return count;
}

LoadResult load(std::istream& is) {
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  bool saw_line = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    saw_line = true;

    const auto record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      result.diagnostics.push_back({line_no, "not a JSON object", false});
      continue;
    }

    VerifySample sample;
    bool ok = true;
    auto require = [&](const char* key, std::string& field, bool nonempty) {
      const auto value = get_string(record, key);
      if (!value) {
        result.diagnostics.push_back(
            {line_no, std::string("missing string field '") + key + "'", false});
        ok = false;
        return;
      }
      if (nonempty && value->empty()) {
        result.diagnostics.push_back(
            {line_no, std::string("field '") + key + "' must be nonempty", false});
        ok = false;
        return;
      }
      field = *value;
    };
    require("image_ref", sample.image_ref, false);
    require("question", sample.question, false);
    require("caption", sample.caption, true);
    require("answer", sample.answer, true);
    require("source", sample.source, false);
    require("category", sample.category, false);
    require("subtask", sample.subtask, false);

    const auto boxes_it = record.find("boxes");
    if (boxes_it == record.end() || !boxes_it->is_array() || boxes_it->empty()) {
      result.diagnostics.push_back({line_no, "missing or empty 'boxes' array", false});
      ok = false;
    } else {
      for (const auto& entry : *boxes_it) {
        std::vector<double> coords;
        if (entry.is_array() && (entry.size() == 4 || entry.size() == 8)) {
          for (const auto& value : entry) {
            if (!value.is_number()) break;
            coords.push_back(value.get<double>());
          }
        }
        std::optional<geom::Rect> rect;
        if (coords.size() == 4) {
          rect = geom::normalize_rect(coords[0], coords[1], coords[2], coords[3]);
        } else if (coords.size() == 8) {
          rect = geom::enclosing_rect(coords);  // four-point annotation
        }
        if (!rect) {
          result.diagnostics.push_back({line_no, "malformed box entry", false});
          ok = false;
          break;
        }
        sample.boxes.push_back(*rect);
      }
    }

    if (!ok) continue;

    if (!known_category(sample.category)) {
      result.diagnostics.push_back(
          {line_no, "unknown category '" + sample.category + "'", true});
    } else if (!known_subtask(sample.category, sample.subtask)) {
      result.diagnostics.push_back(
          {line_no, "unknown subtask '" + sample.subtask + "'", true});
    }
    result.samples.push_back(std::move(sample));
  }
  if (!saw_line) throw std::runtime_error("dataset stream holds no records");
  return result;
}

LoadResult load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset file: " + path);
  return load(is);
}

std::string serialize_sample(const VerifySample& sample) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const geom::Rect& r : sample.boxes) boxes.push_back({r.x1, r.y1, r.x2, r.y2});
  const nlohmann::json record{
      {"image_ref", sample.image_ref}, {"question", sample.question},
      {"caption", sample.caption},     {"boxes", std::move(boxes)},
      {"answer", sample.answer},       {"source", sample.source},
      {"category", sample.category},   {"subtask", sample.subtask},
  };
  return record.dump();
}

int caption_word_count(std::string_view caption) {
  int words = 0;
  for (const std::string& token : text::tokenize(caption)) {
    const bool punct = token.size() == 1 && !std::isalnum(static_cast<unsigned char>(token[0])) &&
                       static_cast<unsigned char>(token[0]) < 128;
    if (!punct) ++words;
  }
  return words;
}

VerifyOutcome verify(const VerifySample& sample,
                     const std::optional<geom::BoxSet>& reference_boxes,
                     const CaptionWordBounds& bounds) {
  VerifyOutcome outcome;
  if (reference_boxes &&
      geom::union_iou(sample.boxes, *reference_boxes) < kVerifyIouThreshold) {
    outcome.reasons.emplace_back("bbox");
  }
  const int words = caption_word_count(sample.caption);
  if (words < bounds.lo || words > bounds.hi) {
    outcome.reasons.emplace_back("caption length");
  }
  if (sample.answer.empty()) outcome.reasons.emplace_back("answer");
  outcome.pass = outcome.reasons.empty();
  return outcome;
}

DatasetStats stats(std::span<const VerifySample> samples) {
  if (samples.empty()) throw std::invalid_argument("stats over an empty dataset");
  DatasetStats out;
  out.sample_count = samples.size();
  std::map<std::string, SourceStats> per_source;
  for (const VerifySample& sample : samples) {
    const double boxes = static_cast<double>(sample.boxes.size());
    const double words = caption_word_count(sample.caption);
    out.avg_boxes_per_sample += boxes;
    out.avg_caption_words += words;
    SourceStats& src = per_source[sample.source];
    ++src.count;
    src.avg_boxes += boxes;
    src.avg_caption_words += words;
  }
  const double n = static_cast<double>(samples.size());
  out.avg_boxes_per_sample /= n;
  out.avg_caption_words /= n;
  for (auto& [name, src] : per_source) {
    src.avg_boxes /= static_cast<double>(src.count);
    src.avg_caption_words /= static_cast<double>(src.count);
    out.per_source.emplace_back(name, src);
  }
  return out;
}

}  // namespace satori::data
