#pragma once

#include <optional>
#include <ostream>
#include <string>

#include "satori/dataset_io.hpp"
#include "satori/reward_engine.hpp"
#include "satori/toy_env.hpp"

// Subcommand implementations behind the `satori` executable. Results go to
// `out`, diagnostics and progress to `err`; the return value is the process
// exit code (0 iff the requested computation completed).
namespace satori::cli {

struct ScoreOptions {
  std::string rollouts_path;
  std::optional<std::string> out_path;  // JSONL here, summary to `out`
  reward::Weights weights = reward::kEqualWeights;
  reward::OutputMode default_mode = reward::OutputMode::CaptionBoxAnswer;
};
int run_score(const ScoreOptions& options, std::ostream& out, std::ostream& err);

struct TrainToyOptions {
  toy::TrainOptions train;
  std::optional<std::string> log_path;
  bool progress = true;
};
int run_train_toy(const TrainToyOptions& options, std::ostream& out, std::ostream& err);

struct RadOptions {
  std::string dump_path;
  std::string boxes_path;  // JSONL: {"boxes": [[x1,y1,x2,y2],...], "image_size": [W,H]}
};
int run_rad(const RadOptions& options, std::ostream& out, std::ostream& err);

struct VarianceOptions {
  std::string input_path;  // training-log JSONL or CSV of reward samples
  reward::Weights weights = reward::kEqualWeights;
  std::size_t baseline_component = 2;  // accuracy
  std::optional<std::string> json_out;
};
int run_variance(const VarianceOptions& options, std::ostream& out, std::ostream& err);

struct ValidateDataOptions {
  std::string dataset_path;
  std::optional<std::string> reference_path;  // JSONL {"boxes": [...]} per valid sample
  data::CaptionWordBounds bounds;
};
int run_validate_data(const ValidateDataOptions& options, std::ostream& out,
                      std::ostream& err);

struct StatsOptions {
  std::string dataset_path;
  std::optional<std::string> json_out;
};
int run_stats(const StatsOptions& options, std::ostream& out, std::ostream& err);

}  // namespace satori::cli
