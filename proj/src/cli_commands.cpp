#include "satori/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "satori/attention_rad.hpp"
#include "satori/variance_lab.hpp"

namespace satori::cli {

namespace {

using nlohmann::json;

std::optional<geom::BoxSet> boxes_from_json(const json& arr) {
  if (!arr.is_array()) return std::nullopt;
  geom::BoxSet boxes;
  for (const auto& entry : arr) {
    if (!entry.is_array() || entry.size() != 4) return std::nullopt;
    double c[4];
    for (std::size_t k = 0; k < 4; ++k) {
      if (!entry[k].is_number()) return std::nullopt;
      c[k] = entry[k].get<double>();
    }
    const auto rect = geom::normalize_rect(c[0], c[1], c[2], c[3]);
    if (!rect) return std::nullopt;
    boxes.push_back(*rect);
  }
  return boxes;
}

}  // namespace

int run_score(const ScoreOptions& options, std::ostream& out, std::ostream& err) {
  std::ifstream in(options.rollouts_path);
  if (!in) {
    err << "score: cannot open " << options.rollouts_path << "\n";
    return 1;
  }
  std::ofstream out_file;
  std::ostream* records = &out;
  std::ostream* table = &err;
  if (options.out_path) {
    out_file.open(*options.out_path);
    if (!out_file) {
      err << "score: cannot write " << *options.out_path << "\n";
      return 1;
    }
    records = &out_file;
    table = &out;
  }

  std::array<double, 4> sums{};
  double total_sum = 0.0;
  std::size_t scored = 0;
  std::map<std::string, std::vector<double>> group_totals;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json record = json::parse(line, nullptr, false);
    auto fail = [&](const std::string& message) {
      err << "score: line " << line_no << ": " << message << "\n";
      *records << json{{"line", line_no}, {"error", message}}.dump() << "\n";
    };
    if (record.is_discarded() || !record.is_object()) {
      fail("not a JSON object");
      continue;
    }
    if (!record.contains("raw") || !record["raw"].is_string() ||
        !record.contains("gold_caption") || !record["gold_caption"].is_string() ||
        !record.contains("gold_answer") || !record["gold_answer"].is_string() ||
        !record.contains("gold_boxes")) {
      fail("missing raw/gold_caption/gold_boxes/gold_answer");
      continue;
    }
    const auto gold_boxes = boxes_from_json(record["gold_boxes"]);
    if (!gold_boxes) {
      fail("malformed gold_boxes");
      continue;
    }
    reward::OutputMode mode = options.default_mode;
    if (record.contains("mode")) {
      const auto parsed_mode = record["mode"].is_string()
                                   ? reward::parse_mode(record["mode"].get<std::string>())
                                   : std::nullopt;
      if (!parsed_mode) {
        fail("unknown mode");
        continue;
      }
      mode = *parsed_mode;
    }

    const auto parsed = reward::parse_structured(record["raw"].get<std::string>(), mode);
    const auto breakdown = reward::compose_reward(
        parsed,
        {record["gold_caption"].get<std::string>(), *gold_boxes,
         record["gold_answer"].get<std::string>()},
        options.weights, mode);

    json out_record{
        {"r_caption", breakdown.r_caption}, {"r_bbox", breakdown.r_bbox},
        {"r_acc", breakdown.r_acc},         {"r_format", breakdown.r_format},
        {"weights", breakdown.weights},     {"total", breakdown.total},
    };
    if (record.contains("id")) out_record["id"] = record["id"];
    *records << out_record.dump() << "\n";

    const auto components = breakdown.components();
    for (std::size_t k = 0; k < 4; ++k) sums[k] += components[k];
    total_sum += breakdown.total;
    ++scored;
    if (record.contains("group") && record["group"].is_string()) {
      group_totals[record["group"].get<std::string>()].push_back(breakdown.total);
    }
  }

  if (scored == 0) {
    err << "score: no scorable records in " << options.rollouts_path << "\n";
    return 1;
  }
  const double n = static_cast<double>(scored);
  *table << std::fixed << std::setprecision(6);
  *table << "records scored   " << scored << "\n";
  *table << "mean r_caption   " << sums[0] / n << "\n";
  *table << "mean r_bbox      " << sums[1] / n << "\n";
  *table << "mean r_acc       " << sums[2] / n << "\n";
  *table << "mean r_format    " << sums[3] / n << "\n";
  *table << "mean total       " << total_sum / n << "\n";
  if (!group_totals.empty()) {
    double variance_sum = 0.0;
    for (const auto& [group, totals] : group_totals) {
      double mean = 0.0;
      for (double t : totals) mean += t;
      mean /= static_cast<double>(totals.size());
      double var = 0.0;
      for (double t : totals) var += (t - mean) * (t - mean);
      variance_sum += var / static_cast<double>(totals.size());
    }
    *table << "groups           " << group_totals.size() << "\n";
    *table << "mean group var   " << variance_sum / static_cast<double>(group_totals.size())
           << "\n";
  }
  return 0;
}

int run_train_toy(const TrainToyOptions& options, std::ostream& out, std::ostream& err) {
  std::ofstream log_file;
  std::ostream* log = nullptr;
  if (options.log_path) {
    log_file.open(*options.log_path);
    if (!log_file) {
      err << "train-toy: cannot write " << *options.log_path << "\n";
      return 1;
    }
    log = &log_file;
  }
  try {
    const toy::TrainResult result = toy::train(options.train, log);
    if (options.progress) {
      for (const toy::EvalRecord& record : result.evals) {
        err << "step " << record.step << "  accuracy " << std::fixed
            << std::setprecision(4) << record.eval.accuracy << "\n";
      }
    }
    out << std::fixed << std::setprecision(6);
    out << "final held-out accuracy " << result.final_eval.accuracy << " (n="
        << result.final_eval.samples << ")\n";
    out << "mean tokens per rollout " << result.final_eval.mean_tokens << "\n";
    out << "mean reward caption " << result.final_eval.mean_caption << " bbox "
        << result.final_eval.mean_bbox << " acc " << result.final_eval.mean_acc
        << " format " << result.final_eval.mean_format << " total "
        << result.final_eval.mean_total << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "train-toy: " << e.what() << "\n";
    return 1;
  }
}

int run_rad(const RadOptions& options, std::ostream& out, std::ostream& err) {
  std::ifstream dump(options.dump_path, std::ios::binary);
  if (!dump) {
    err << "rad: cannot open " << options.dump_path << "\n";
    return 1;
  }
  std::vector<attn::AttentionTensor> tensors;
  try {
    tensors = attn::read_dump(dump);
  } catch (const std::exception& e) {
    err << "rad: " << e.what() << "\n";
    return 1;
  }
  if (tensors.empty()) {
    err << "rad: dump holds no records\n";
    return 1;
  }

  std::ifstream boxes_in(options.boxes_path);
  if (!boxes_in) {
    err << "rad: cannot open " << options.boxes_path << "\n";
    return 1;
  }
  struct BoxLine {
    geom::BoxSet boxes;
    double image_w, image_h;
  };
  std::vector<BoxLine> box_lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(boxes_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object() || !record.contains("boxes") ||
        !record.contains("image_size") || !record["image_size"].is_array() ||
        record["image_size"].size() != 2) {
      err << "rad: boxes line " << line_no << ": need {\"boxes\": [...], \"image_size\": [W,H]}\n";
      return 1;
    }
    const auto boxes = boxes_from_json(record["boxes"]);
    if (!boxes) {
      err << "rad: boxes line " << line_no << ": malformed boxes\n";
      return 1;
    }
    box_lines.push_back({*boxes, record["image_size"][0].get<double>(),
                         record["image_size"][1].get<double>()});
  }
  if (box_lines.size() != tensors.size()) {
    err << "rad: " << tensors.size() << " dump records but " << box_lines.size()
        << " box lines\n";
    return 1;
  }

  out << std::fixed << std::setprecision(9);
  double mean = 0.0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    try {
      const auto grid = attn::aggregate(tensors[i]);
      const auto mask =
          attn::boxes_to_mask(box_lines[i].boxes, box_lines[i].image_w,
                              box_lines[i].image_h, grid.h, grid.w);
      const double value = attn::rad(grid, mask);
      mean += value;
      out << i << "\t" << value << "\n";
    } catch (const std::exception& e) {
      err << "rad: sample " << i << ": " << e.what() << "\n";
      return 1;
    }
  }
  out << "mean\t" << mean / static_cast<double>(tensors.size()) << "\n";
  return 0;
}

namespace {

const std::array<std::string, 4> kComponentNames{"caption", "bbox", "acc", "format"};

// Training-log JSONL: per-step "components" arrays, grouped by step.
std::optional<variance::RewardSampleMatrix> samples_from_log(std::istream& in,
                                                             std::ostream& err) {
  variance::RewardSampleMatrix samples;
  samples.component_names.assign(kComponentNames.begin(), kComponentNames.end());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      err << "variance: line " << line_no << ": not a JSON object\n";
      return std::nullopt;
    }
    if (!record.contains("type") || record["type"] != "step") continue;
    if (!record.contains("components") || !record["components"].is_array()) continue;
    const std::string group = std::to_string(record.value("step", 0));
    for (const auto& row : record["components"]) {
      if (!row.is_array() || row.size() != 4) {
        err << "variance: line " << line_no << ": malformed components row\n";
        return std::nullopt;
      }
      samples.rows.push_back({row[0].get<double>(), row[1].get<double>(),
                              row[2].get<double>(), row[3].get<double>()});
      samples.group_labels.push_back(group);
    }
  }
  return samples;
}

// CSV: header caption,bbox,acc,format[,group] then numeric rows.
std::optional<variance::RewardSampleMatrix> samples_from_csv(std::istream& in,
                                                             std::ostream& err) {
  variance::RewardSampleMatrix samples;
  std::string line;
  if (!std::getline(in, line)) {
    err << "variance: empty CSV\n";
    return std::nullopt;
  }
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  bool has_group = !header.empty() && header.back() == "group";
  const std::size_t k = header.size() - (has_group ? 1 : 0);
  if (k == 0) {
    err << "variance: CSV header has no components\n";
    return std::nullopt;
  }
  samples.component_names.assign(header.begin(), header.begin() + k);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != header.size()) {
      err << "variance: line " << line_no << ": expected " << header.size()
          << " fields\n";
      return std::nullopt;
    }
    std::vector<double> row;
    try {
      for (std::size_t c = 0; c < k; ++c) row.push_back(std::stod(fields[c]));
    } catch (const std::exception&) {
      err << "variance: line " << line_no << ": non-numeric value\n";
      return std::nullopt;
    }
    samples.rows.push_back(std::move(row));
    if (has_group) samples.group_labels.push_back(fields.back());
  }
  return samples;
}

json report_to_json(const variance::DecompositionReport& report) {
  json j{
      {"total_variance", report.total_variance},
      {"intra_variance", report.intra_variance},
      {"inter_variance", report.inter_variance},
      {"component_names", report.component_names},
      {"component_variances", report.component_variances},
      {"covariance", report.covariance},
      {"composite_variance", report.composite_variance},
  };
  if (report.reduction_ratio) j["reduction_ratio"] = *report.reduction_ratio;
  if (report.baseline_component) j["baseline_component"] = *report.baseline_component;
  return j;
}

}  // namespace

int run_variance(const VarianceOptions& options, std::ostream& out, std::ostream& err) {
  std::ifstream in(options.input_path);
  if (!in) {
    err << "variance: cannot open " << options.input_path << "\n";
    return 1;
  }
  const bool csv = options.input_path.size() >= 4 &&
                   options.input_path.substr(options.input_path.size() - 4) == ".csv";
  auto samples = csv ? samples_from_csv(in, err) : samples_from_log(in, err);
  if (!samples) return 1;
  if (samples->rows.size() < 2) {
    err << "variance: need at least 2 sample rows\n";
    return 1;
  }
  std::vector<double> weights(options.weights.begin(), options.weights.end());
  weights.resize(samples->component_count(), 0.0);

  variance::DecompositionReport report;
  try {
    report = variance::diversification_report(*samples, weights,
                                              options.baseline_component);
  } catch (const std::exception& e) {
    err << "variance: " << e.what() << "\n";
    return 1;
  }

  out << std::fixed << std::setprecision(6);
  out << "rows                " << samples->rows.size() << "\n";
  for (std::size_t c = 0; c < report.component_variances.size(); ++c) {
    out << "var[" << report.component_names[c] << "]" << std::setw(13 - static_cast<int>(report.component_names[c].size())) << " "
        << report.component_variances[c] << "\n";
  }
  out << "covariance\n";
  for (const auto& row : report.covariance) {
    out << "   ";
    for (double v : row) out << std::setw(12) << v;
    out << "\n";
  }
  out << "composite variance  " << report.composite_variance << "\n";
  if (report.reduction_ratio) {
    out << "baseline            " << report.component_names[*report.baseline_component]
        << "\n";
    out << "reduction ratio     " << *report.reduction_ratio << "\n";
  }
  if (!samples->group_labels.empty()) {
    out << "total variance      " << report.total_variance << "\n";
    out << "intra variance      " << report.intra_variance << "\n";
    out << "inter variance      " << report.inter_variance << "\n";
  }
  const json j = report_to_json(report);
  if (options.json_out) {
    std::ofstream json_file(*options.json_out);
    if (!json_file) {
      err << "variance: cannot write " << *options.json_out << "\n";
      return 1;
    }
    json_file << j.dump(2) << "\n";
  } else {
    out << j.dump() << "\n";
  }
  return 0;
}

int run_validate_data(const ValidateDataOptions& options, std::ostream& out,
                      std::ostream& err) {
  data::LoadResult loaded;
  try {
    loaded = data::load_file(options.dataset_path);
  } catch (const std::exception& e) {
    err << "validate-data: " << e.what() << "\n";
    return 1;
  }
  for (const data::LineDiagnostic& d : loaded.diagnostics) {
    err << "validate-data: line " << d.line << (d.warning ? " (warning): " : ": ")
        << d.message << "\n";
  }

  std::vector<std::optional<geom::BoxSet>> references(loaded.samples.size(),
                                                      std::nullopt);
  if (options.reference_path) {
    std::ifstream ref_in(*options.reference_path);
    if (!ref_in) {
      err << "validate-data: cannot open " << *options.reference_path << "\n";
      return 1;
    }
    std::string line;
    std::size_t index = 0;
    while (std::getline(ref_in, line) && index < references.size()) {
      if (line.empty()) continue;
      const json record = json::parse(line, nullptr, false);
      if (record.is_discarded() || !record.is_object() || !record.contains("boxes")) {
        err << "validate-data: reference line " << (index + 1) << " malformed\n";
        return 1;
      }
      references[index] = boxes_from_json(record["boxes"]);
      if (!references[index]) {
        err << "validate-data: reference line " << (index + 1) << " malformed boxes\n";
        return 1;
      }
      ++index;
    }
  }

  std::size_t passed = 0;
  for (std::size_t i = 0; i < loaded.samples.size(); ++i) {
    const auto outcome = data::verify(loaded.samples[i], references[i], options.bounds);
    passed += outcome.pass;
    out << json{{"index", i}, {"pass", outcome.pass}, {"reasons", outcome.reasons}}.dump()
        << "\n";
  }
  err << "validate-data: " << loaded.samples.size() << " samples, " << passed
      << " passed, " << loaded.error_count() << " malformed lines\n";
  return 0;
}

int run_stats(const StatsOptions& options, std::ostream& out, std::ostream& err) {
  data::LoadResult loaded;
  try {
    loaded = data::load_file(options.dataset_path);
  } catch (const std::exception& e) {
    err << "stats: " << e.what() << "\n";
    return 1;
  }
  for (const data::LineDiagnostic& d : loaded.diagnostics) {
    err << "stats: line " << d.line << (d.warning ? " (warning): " : ": ") << d.message
        << "\n";
  }
  if (loaded.samples.empty()) {
    err << "stats: no valid samples\n";
    return 1;
  }
  const data::DatasetStats stats = data::stats(loaded.samples);
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(20) << "source" << std::right << std::setw(10)
      << "samples" << std::setw(16) << "avg boxes" << std::setw(16) << "avg words"
      << "\n";
  out << std::left << std::setw(20) << "(all)" << std::right << std::setw(10)
      << stats.sample_count << std::setw(16) << stats.avg_boxes_per_sample
      << std::setw(16) << stats.avg_caption_words << "\n";
  for (const auto& [source, src] : stats.per_source) {
    out << std::left << std::setw(20) << source << std::right << std::setw(10)
        << src.count << std::setw(16) << src.avg_boxes << std::setw(16)
        << src.avg_caption_words << "\n";
  }
  if (options.json_out) {
    json per_source = json::object();
    for (const auto& [source, src] : stats.per_source) {
      per_source[source] = {{"count", src.count},
                            {"avg_boxes", src.avg_boxes},
                            {"avg_caption_words", src.avg_caption_words}};
    }
    const json j{{"sample_count", stats.sample_count},
                 {"avg_boxes_per_sample", stats.avg_boxes_per_sample},
                 {"avg_caption_words", stats.avg_caption_words},
                 {"per_source", std::move(per_source)}};
    std::ofstream json_file(*options.json_out);
    if (!json_file) {
      err << "stats: cannot write " << *options.json_out << "\n";
      return 1;
    }
    json_file << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace satori::cli
