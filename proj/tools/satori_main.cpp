#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "satori/cli.hpp"

namespace {

using nlohmann::json;

// Config-file values fill in flags the user did not pass; flags win.
json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  json config = json::parse(in, nullptr, false);
  if (config.is_discarded() || !config.is_object()) {
    throw CLI::ValidationError("--config", path + " is not a JSON object");
  }
  return config;
}

template <typename T>
void merge_option(const CLI::App* app, const json& config, const std::string& name,
                  T& value) {
  const CLI::Option* opt = app->get_option_no_throw("--" + name);
  if (opt != nullptr && opt->count() > 0) return;  // flag wins
  const auto it = config.find(name);
  if (it == config.end()) return;
  it->get_to(value);
}

std::optional<satori::reward::Weights> parse_weight_list(const std::string& text) {
  satori::reward::Weights weights{};
  std::stringstream ss(text);
  std::string field;
  std::size_t k = 0;
  while (std::getline(ss, field, ',')) {
    if (k >= 4) return std::nullopt;
    try {
      weights[k++] = std::stod(field);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  if (k != 4) return std::nullopt;
  return weights;
}

// --weights / --preset resolution plus validation.
satori::reward::Weights resolve_weights(const std::string& weights_text,
                                        const std::string& preset) {
  if (!preset.empty()) {
    const auto w = satori::reward::weight_preset(preset);
    if (!w) throw CLI::ValidationError("--preset", "unknown preset '" + preset + "'");
    return *w;
  }
  if (!weights_text.empty()) {
    const auto w = parse_weight_list(weights_text);
    if (!w) throw CLI::ValidationError("--weights", "expected w1,w2,w3,w4");
    satori::reward::validate_weights(*w);
    return *w;
  }
  return satori::reward::kEqualWeights;
}

std::uint64_t resolve_seed(const CLI::App* app, const json& config) {
  const CLI::Option* opt = app->get_option_no_throw("--seed");
  if (opt != nullptr && opt->count() > 0) return opt->as<std::uint64_t>();
  if (config.contains("seed")) return config["seed"].get<std::uint64_t>();
  if (const char* env = std::getenv("SATORI_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw CLI::ValidationError("SATORI_SEED", "not a valid seed");
    }
  }
  return 0;
}

satori::reward::OutputMode resolve_mode(const std::string& name) {
  const auto mode = satori::reward::parse_mode(name);
  if (!mode) throw CLI::ValidationError("--mode", "unknown mode '" + name + "'");
  return *mode;
}

int component_index(const std::string& name) {
  if (name == "caption") return 0;
  if (name == "bbox") return 1;
  if (name == "acc") return 2;
  if (name == "format") return 3;
  throw CLI::ValidationError("--baseline", "unknown component '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SATORI verifiable-reward toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string weights_text, preset, mode_name = "caption-first";
  std::uint64_t seed = 0;

  // score
  auto* score = app.add_subcommand("score", "score a rollout JSONL file");
  std::string score_input, score_out;
  score->add_option("--config", config_path, "JSON config file");
  score->add_option("rollouts", score_input, "rollout JSONL file")->required();
  score->add_option("--out", score_out, "write scored JSONL here");
  score->add_option("--weights", weights_text, "w_caption,w_bbox,w_acc,w_format");
  score->add_option("--preset", preset, "equal | bbox-only | accuracy-only")
      ->excludes("--weights");
  score->add_option("--mode", mode_name, "caption-first | bbox-first");

  // train-toy
  auto* train = app.add_subcommand("train-toy", "GRPO training on the toy VQA task");
  int steps = 2000, group_size = 16, epochs = 1, top_k = 0;
  int eval_every = 50, eval_n = 200, final_eval_n = 500;
  double clip_eps = 0.2, kl_coef = 0.05, lr = satori::toy::kToyLearningRate;
  double temperature = 1.0, top_p = 1.0;
  bool early_stop = false, timing = false, quiet = false;
  std::string log_path;
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--steps", steps, "GRPO steps");
  train->add_option("--group-size", group_size, "rollouts per group");
  train->add_option("--clip-eps", clip_eps, "clip range");
  train->add_option("--kl-coef", kl_coef, "KL penalty coefficient");
  train->add_option("--lr", lr, "learning rate");
  train->add_option("--epochs", epochs, "optimization epochs per batch");
  train->add_option("--weights", weights_text, "w_caption,w_bbox,w_acc,w_format");
  train->add_option("--preset", preset, "equal | bbox-only | accuracy-only")
      ->excludes("--weights");
  train->add_option("--mode", mode_name, "caption-first | bbox-first");
  train->add_flag("--early-stop", early_stop, "stop eval rollouts after the answer");
  train->add_option("--seed", seed, "run seed (SATORI_SEED as fallback)");
  train->add_option("--log", log_path, "training log JSONL path");
  train->add_option("--temperature", temperature, "sampling temperature");
  train->add_option("--top-k", top_k, "top-k sampling cutoff (0 = off)");
  train->add_option("--top-p", top_p, "top-p sampling cutoff (1 = off)");
  train->add_option("--eval-every", eval_every, "evaluation cadence in steps");
  train->add_option("--eval-n", eval_n, "held-out tasks per evaluation");
  train->add_option("--final-eval-n", final_eval_n, "held-out tasks for the final eval");
  train->add_flag("--timing", timing, "add wall_clock_ms to log records");
  train->add_flag("--quiet", quiet, "suppress progress lines");

  // rad
  auto* rad = app.add_subcommand("rad", "region attention density from a dump");
  std::string rad_dump, rad_boxes;
  rad->add_option("--config", config_path, "JSON config file");
  rad->add_option("dump", rad_dump, "attention dump file")->required();
  rad->add_option("boxes", rad_boxes, "boxes JSONL file")->required();

  // variance
  auto* variance = app.add_subcommand("variance", "reward variance decomposition");
  std::string variance_input, baseline = "acc", variance_json;
  variance->add_option("--config", config_path, "JSON config file");
  variance->add_option("input", variance_input, "training log JSONL or CSV")->required();
  variance->add_option("--weights", weights_text, "w_caption,w_bbox,w_acc,w_format");
  variance->add_option("--preset", preset, "equal | bbox-only | accuracy-only")
      ->excludes("--weights");
  variance->add_option("--baseline", baseline, "caption | bbox | acc | format");
  variance->add_option("--json-out", variance_json, "write the JSON report here");

  // validate-data
  auto* validate = app.add_subcommand("validate-data", "dataset verification checks");
  std::string dataset_path, reference_path;
  int min_words = 10, max_words = 20;
  validate->add_option("--config", config_path, "JSON config file");
  validate->add_option("dataset", dataset_path, "dataset JSONL file")->required();
  validate->add_option("--reference", reference_path,
                       "reference boxes JSONL, line-aligned with valid samples");
  validate->add_option("--min-words", min_words, "caption word lower bound");
  validate->add_option("--max-words", max_words, "caption word upper bound");

  // stats
  auto* stats = app.add_subcommand("stats", "dataset statistics");
  std::string stats_path, stats_json;
  stats->add_option("--config", config_path, "JSON config file");
  stats->add_option("dataset", stats_path, "dataset JSONL file")->required();
  stats->add_option("--json-out", stats_json, "write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  try {
    json config = json::object();
    if (!config_path.empty()) config = load_config(config_path);

    if (score->parsed()) {
      merge_option(score, config, "weights", weights_text);
      merge_option(score, config, "preset", preset);
      merge_option(score, config, "mode", mode_name);
      merge_option(score, config, "out", score_out);
      satori::cli::ScoreOptions options;
      options.rollouts_path = score_input;
      if (!score_out.empty()) options.out_path = score_out;
      options.weights = resolve_weights(weights_text, preset);
      options.default_mode = resolve_mode(mode_name);
      return satori::cli::run_score(options, std::cout, std::cerr);
    }

    if (train->parsed()) {
      merge_option(train, config, "steps", steps);
      merge_option(train, config, "group-size", group_size);
      merge_option(train, config, "clip-eps", clip_eps);
      merge_option(train, config, "kl-coef", kl_coef);
      merge_option(train, config, "lr", lr);
      merge_option(train, config, "epochs", epochs);
      merge_option(train, config, "weights", weights_text);
      merge_option(train, config, "preset", preset);
      merge_option(train, config, "mode", mode_name);
      merge_option(train, config, "early-stop", early_stop);
      merge_option(train, config, "log", log_path);
      merge_option(train, config, "temperature", temperature);
      merge_option(train, config, "top-k", top_k);
      merge_option(train, config, "top-p", top_p);
      merge_option(train, config, "eval-every", eval_every);
      merge_option(train, config, "eval-n", eval_n);
      merge_option(train, config, "final-eval-n", final_eval_n);
      merge_option(train, config, "timing", timing);

      satori::cli::TrainToyOptions options;
      options.train.grpo.group_size = group_size;
      options.train.grpo.clip_eps = clip_eps;
      options.train.grpo.kl_coef = kl_coef;
      options.train.grpo.learning_rate = lr;
      options.train.grpo.epochs = epochs;
      options.train.weights = resolve_weights(weights_text, preset);
      options.train.mode = resolve_mode(mode_name);
      options.train.early_stop = early_stop;
      options.train.steps = steps;
      options.train.seed = resolve_seed(train, config);
      options.train.temperature = temperature;
      options.train.top_k = top_k;
      options.train.top_p = top_p;
      options.train.eval_every = eval_every;
      options.train.eval_n = eval_n;
      options.train.final_eval_n = final_eval_n;
      options.train.timing = timing;
      if (!log_path.empty()) options.log_path = log_path;
      options.progress = !quiet;
      return satori::cli::run_train_toy(options, std::cout, std::cerr);
    }

    if (rad->parsed()) {
      satori::cli::RadOptions options;
      options.dump_path = rad_dump;
      options.boxes_path = rad_boxes;
      return satori::cli::run_rad(options, std::cout, std::cerr);
    }

    if (variance->parsed()) {
      merge_option(variance, config, "weights", weights_text);
      merge_option(variance, config, "preset", preset);
      merge_option(variance, config, "baseline", baseline);
      merge_option(variance, config, "json-out", variance_json);
      satori::cli::VarianceOptions options;
      options.input_path = variance_input;
      options.weights = resolve_weights(weights_text, preset);
      options.baseline_component = component_index(baseline);
      if (!variance_json.empty()) options.json_out = variance_json;
      return satori::cli::run_variance(options, std::cout, std::cerr);
    }

    if (validate->parsed()) {
      merge_option(validate, config, "reference", reference_path);
      merge_option(validate, config, "min-words", min_words);
      merge_option(validate, config, "max-words", max_words);
      satori::cli::ValidateDataOptions options;
      options.dataset_path = dataset_path;
      if (!reference_path.empty()) options.reference_path = reference_path;
      options.bounds = {min_words, max_words};
      return satori::cli::run_validate_data(options, std::cout, std::cerr);
    }

    if (stats->parsed()) {
      merge_option(stats, config, "json-out", stats_json);
      satori::cli::StatsOptions options;
      options.dataset_path = stats_path;
      if (!stats_json.empty()) options.json_out = stats_json;
      return satori::cli::run_stats(options, std::cout, std::cerr);
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "satori: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
