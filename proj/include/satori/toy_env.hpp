#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "satori/box_geometry.hpp"
#include "satori/grpo_core.hpp"
#include "satori/reward_engine.hpp"

// A synthetic structured-VQA task small enough for a linear categorical
// policy, but with the credit-assignment structure of the real problem:
// the answer head reads the scene *through* the sampled bounding box
// (attribute-under-box features), so localization quality gates answer
// accuracy. Dense caption/box rewards supervise grounding directly, while
// an accuracy-only signal has to discover it through outcome credit alone.
namespace satori::toy {

inline constexpr int kGridCells = 4;    // 4x4 cell grid
inline constexpr int kCellPixels = 8;   // cell side in pixels
inline constexpr int kImagePixels = kGridCells * kCellPixels;
inline constexpr int kCellCount = kGridCells * kGridCells;
inline constexpr int kShapeCount = 3;
inline constexpr int kColorCount = 3;
inline constexpr int kAttrCount = kShapeCount + kColorCount;
inline constexpr int kCoordVocab = kGridCells + 1;  // cell-corner pixels
inline constexpr int kAnswerVocab = kAttrCount;
inline constexpr int kCaptionVocab = 4;             // 3 values + "none"
inline constexpr int kNoneToken = 3;

extern const std::array<std::string, 3> kColorNames;
extern const std::array<std::string, 3> kShapeNames;
// colors first, then shapes; doubles as the answer vocabulary
extern const std::array<std::string, 6> kAttrNames;

struct SceneObject {
  int row = 0;
  int col = 0;
  int shape = 0;
  int color = 0;

  int cell() const { return row * kGridCells + col; }
};

struct Scene {
  std::vector<SceneObject> objects;  // 1..5, distinct cells, row-major order
  std::uint64_t seed = 0;

  const SceneObject* object_at(int cell) const;
};

enum class QuestionKind { color_of_shape, shape_of_color };

struct Task {
  Scene scene;
  QuestionKind kind = QuestionKind::color_of_shape;
  int queried_value = 0;  // shape index or color index, by kind
  int target_index = 0;   // the unique matching object in scene.objects
  std::string question;
  std::string gold_caption;
  geom::Rect gold_box;
  std::string gold_answer;
  std::uint64_t seed = 0;
};

// Deterministic in the seed; the question always has a unique referent.
Task generate_task(std::uint64_t seed);

// --- policy ---------------------------------------------------------------

// Observation feature blocks (total kObsDim):
//   per-cell scene one-hots, question one-hots, per-cell query-match bits,
//   attribute-under-sampled-box bits (filled once the box tokens exist),
//   an output-order flag and a constant bias.
inline constexpr int kSceneBlock = 0;                        // 16 * 7
inline constexpr int kQuestionBlock = kSceneBlock + 7 * kCellCount;   // 8
inline constexpr int kMatchBlock = kQuestionBlock + 8;       // 16
inline constexpr int kBoxAttrBlock = kMatchBlock + kCellCount;  // 12
inline constexpr int kModeFlag = kBoxAttrBlock + 2 * kAttrCount;
inline constexpr int kBiasFlag = kModeFlag + 1;
inline constexpr int kObsDim = kBiasFlag + 1;

std::vector<double> build_observation(const Task& task, reward::OutputMode mode);

enum class SlotFamily { caption_color, caption_shape, box_coord, answer };

struct Slot {
  SlotFamily family;
  int index;  // cell for caption slots, axis (x1,y1,x2,y2) for box slots
};

// Decoding order for a mode; early_stop truncates after the answer slot and
// only applies to BoxAnswerCaption.
std::vector<Slot> slot_plan(reward::OutputMode mode, bool early_stop);

int slot_vocab_size(const Slot& slot);

// Linear per-slot categorical policy: one weight matrix over the shared
// observation vector; each slot owns a row block and conditions on its
// family's feature dims (caption slots on their cell, box slots on the
// query-match map, the answer on the attribute-under-box block). Parameter
// blocks are keyed by slot identity, not decoding position, so both output
// orders share one parameter space.
class ToyPolicy final : public grpo::DifferentiablePolicy {
 public:
  ToyPolicy();

  double temperature = 1.0;  // must stay > 0
  int top_k = 0;             // 0 disables
  double top_p = 1.0;        // 1 disables

  std::size_t parameter_count() const override { return weights_.size(); }
  std::span<double> parameters() override { return weights_; }
  std::span<const double> parameters() const override { return weights_; }

  std::vector<double> token_log_probs(std::span<const double> observation,
                                      std::span<const int> tokens) const override;
  void accumulate_log_prob_gradient(std::span<const double> observation,
                                    std::span<const int> tokens,
                                    std::span<const double> coefficients,
                                    std::span<double> grad) const override;

  // Full-distribution log-softmax for one slot given features.
  std::vector<double> slot_log_probs(const Slot& slot,
                                     std::span<const double> features) const;

 private:
  std::vector<double> weights_;  // row-major [total vocab rows][kObsDim]
};

struct RolloutSample {
  std::string raw;
  std::vector<int> tokens;
  std::vector<double> log_probs;  // full log-softmax at the chosen tokens
};

// Samples every slot in plan order and renders the tagged output string.
// greedy picks the argmax instead of sampling.
RolloutSample rollout(const ToyPolicy& policy, const Task& task,
                      reward::OutputMode mode, bool early_stop,
                      std::uint64_t rng_seed, bool greedy = false);

// Renders the tagged string for externally chosen tokens (e.g. gold slots).
std::string render_tokens(std::span<const int> tokens, reward::OutputMode mode,
                          bool early_stop);

// Slot tokens that reproduce the gold annotations exactly.
std::vector<int> gold_tokens(const Task& task, reward::OutputMode mode,
                             bool early_stop);

struct Evaluation {
  double accuracy = 0.0;
  double mean_caption = 0.0;
  double mean_bbox = 0.0;
  double mean_acc = 0.0;
  double mean_format = 0.0;
  double mean_total = 0.0;
  double mean_tokens = 0.0;
  int samples = 0;
};

// Greedy evaluation on a held-out task stream (disjoint from the training
// stream by construction). Pure: identical calls give identical results.
Evaluation evaluate(const ToyPolicy& policy, int n, std::uint64_t seed,
                    reward::OutputMode mode, bool early_stop,
                    const reward::Weights& weights);

// Step size that trains the linear policy to convergence within the toy
// step budgets; the optimizer's own default targets fine-tuning scales.
inline constexpr double kToyLearningRate = 15.0;

inline grpo::GrpoConfig toy_grpo_defaults() {
  grpo::GrpoConfig cfg;
  cfg.learning_rate = kToyLearningRate;
  return cfg;
}

struct TrainOptions {
  grpo::GrpoConfig grpo = toy_grpo_defaults();
  reward::Weights weights = reward::kEqualWeights;
  reward::OutputMode mode = reward::OutputMode::CaptionBoxAnswer;
  bool early_stop = false;  // applies to evaluation rollouts only
  int steps = 2000;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  int top_k = 0;
  double top_p = 1.0;
  int eval_every = 50;
  int eval_n = 200;
  int final_eval_n = 500;
  bool timing = false;  // adds wall_clock_ms to log records
};

struct StepRecord {
  int step = 0;
  std::array<double, 4> mean_components{};  // caption, bbox, acc, format
  double mean_total = 0.0;
  double reward_variance = 0.0;  // population variance of the group totals
  double objective = 0.0;
  double grad_norm = 0.0;
  double mean_tokens = 0.0;
  std::vector<std::array<double, 4>> components;  // per rollout
};

struct EvalRecord {
  int step = 0;
  Evaluation eval;
};

struct TrainResult {
  ToyPolicy policy;
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  Evaluation final_eval;

  // First evaluation step whose held-out accuracy reached the threshold.
  std::optional<int> first_step_at_accuracy(double threshold) const;
};

// Per step: one task, G sampled rollouts, reward_engine scoring, one or
// more GRPO steps. Writes the JSONL training log to `log` when given.
TrainResult train(const TrainOptions& options, std::ostream* log = nullptr);

}  // namespace satori::toy
