#include "satori/toy_env.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "satori/rng.hpp"

namespace satori::toy {

const std::array<std::string, 3> kColorNames{"red", "green", "blue"};
const std::array<std::string, 3> kShapeNames{"circle", "square", "triangle"};
const std::array<std::string, 6> kAttrNames{"red",    "green",  "blue",
                                            "circle", "square", "triangle"};

namespace {

constexpr std::uint64_t kTaskTag = 0x7461736bull;   // task stream
constexpr std::uint64_t kTrainTag = 0x7472696eull;  // per-step training tasks
constexpr std::uint64_t kEvalTag = 0x6576616cull;   // held-out tasks
constexpr std::uint64_t kRollTag = 0x726f6c6cull;   // rollout sampling

}  // namespace

const SceneObject* Scene::object_at(int cell) const {
  for (const SceneObject& obj : objects) {
    if (obj.cell() == cell) return &obj;
  }
  return nullptr;
}

Task generate_task(std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(mix_seed({kTaskTag, seed, attempt}));
    const int count = 1 + static_cast<int>(rng.below(5));

    Scene scene;
    scene.seed = seed;
    std::array<bool, kCellCount> used{};
    for (int i = 0; i < count; ++i) {
      int cell;
      do {
        cell = static_cast<int>(rng.below(kCellCount));
      } while (used[cell]);
      used[cell] = true;
      SceneObject obj;
      obj.row = cell / kGridCells;
      obj.col = cell % kGridCells;
      obj.shape = static_cast<int>(rng.below(kShapeCount));
      obj.color = static_cast<int>(rng.below(kColorCount));
      scene.objects.push_back(obj);
    }
    std::sort(scene.objects.begin(), scene.objects.end(),
              [](const SceneObject& a, const SceneObject& b) {
                return a.cell() < b.cell();
              });

    std::array<int, kShapeCount> shape_count{};
    std::array<int, kColorCount> color_count{};
    for (const SceneObject& obj : scene.objects) {
      ++shape_count[obj.shape];
      ++color_count[obj.color];
    }

    // Candidate questions are attributes with a unique referent.
    std::vector<std::pair<QuestionKind, int>> candidates;
    for (int s = 0; s < kShapeCount; ++s) {
      if (shape_count[s] == 1) candidates.emplace_back(QuestionKind::color_of_shape, s);
    }
    for (int c = 0; c < kColorCount; ++c) {
      if (color_count[c] == 1) candidates.emplace_back(QuestionKind::shape_of_color, c);
    }
    if (candidates.empty()) continue;

    Task task;
    task.scene = std::move(scene);
    task.seed = seed;
    std::tie(task.kind, task.queried_value) =
        candidates[rng.below(candidates.size())];

    for (std::size_t i = 0; i < task.scene.objects.size(); ++i) {
      const SceneObject& obj = task.scene.objects[i];
      const bool match = task.kind == QuestionKind::color_of_shape
                             ? obj.shape == task.queried_value
                             : obj.color == task.queried_value;
      if (match) task.target_index = static_cast<int>(i);
    }
    const SceneObject& target = task.scene.objects[task.target_index];

    if (task.kind == QuestionKind::color_of_shape) {
      task.question = "what color is the " + kShapeNames[task.queried_value] + "?";
      task.gold_answer = kColorNames[target.color];
    } else {
      task.question =
          "what shape is the " + kColorNames[task.queried_value] + " object?";
      task.gold_answer = kShapeNames[target.shape];
    }

    std::string caption;
    for (const SceneObject& obj : task.scene.objects) {
      if (!caption.empty()) caption += " ; ";
      caption += "a " + kColorNames[obj.color] + " " + kShapeNames[obj.shape] +
                 " in cell " + std::to_string(obj.cell());
    }
    task.gold_caption = caption;

    task.gold_box = geom::Rect{static_cast<double>(target.col * kCellPixels),
                               static_cast<double>(target.row * kCellPixels),
                               static_cast<double>((target.col + 1) * kCellPixels),
                               static_cast<double>((target.row + 1) * kCellPixels)};
    return task;
  }
}

std::vector<double> build_observation(const Task& task, reward::OutputMode mode) {
  std::vector<double> obs(kObsDim, 0.0);
  for (const SceneObject& obj : task.scene.objects) {
    const int base = kSceneBlock + 7 * obj.cell();
    obs[base] = 1.0;
    obs[base + 1 + obj.shape] = 1.0;
    obs[base + 4 + obj.color] = 1.0;
  }
  const bool asks_color = task.kind == QuestionKind::color_of_shape;
  obs[kQuestionBlock + (asks_color ? 0 : 1)] = 1.0;
  if (asks_color) {
    obs[kQuestionBlock + 2 + task.queried_value] = 1.0;  // queried shape
  } else {
    obs[kQuestionBlock + 5 + task.queried_value] = 1.0;  // queried color
  }
  for (const SceneObject& obj : task.scene.objects) {
    const bool match = asks_color ? obj.shape == task.queried_value
                                  : obj.color == task.queried_value;
    if (match) obs[kMatchBlock + obj.cell()] = 1.0;
  }
  obs[kModeFlag] = mode == reward::OutputMode::CaptionBoxAnswer ? 1.0 : 0.0;
  obs[kBiasFlag] = 1.0;
  return obs;
}

std::vector<Slot> slot_plan(reward::OutputMode mode, bool early_stop) {
  std::vector<Slot> plan;
  auto push_caption = [&] {
    for (int cell = 0; cell < kCellCount; ++cell) {
      plan.push_back({SlotFamily::caption_color, cell});
      plan.push_back({SlotFamily::caption_shape, cell});
    }
  };
  auto push_box = [&] {
    for (int axis = 0; axis < 4; ++axis) plan.push_back({SlotFamily::box_coord, axis});
  };
  if (mode == reward::OutputMode::CaptionBoxAnswer) {
    push_caption();
    push_box();
    plan.push_back({SlotFamily::answer, 0});
  } else {
    push_box();
    plan.push_back({SlotFamily::answer, 0});
    if (!early_stop) push_caption();
  }
  return plan;
}

int slot_vocab_size(const Slot& slot) {
  switch (slot.family) {
    case SlotFamily::caption_color:
    case SlotFamily::caption_shape:
      return kCaptionVocab;
    case SlotFamily::box_coord:
      return kCoordVocab;
    case SlotFamily::answer:
      return kAnswerVocab;
  }
  return 0;
}

namespace {

constexpr int kCaptionColorRows = 0;
constexpr int kCaptionShapeRows = kCaptionColorRows + kCellCount * kCaptionVocab;
constexpr int kBoxRows = kCaptionShapeRows + kCellCount * kCaptionVocab;
constexpr int kAnswerRows = kBoxRows + 4 * kCoordVocab;
constexpr int kTotalRows = kAnswerRows + kAnswerVocab;

int slot_row_base(const Slot& slot) {
  switch (slot.family) {
    case SlotFamily::caption_color:
      return kCaptionColorRows + slot.index * kCaptionVocab;
    case SlotFamily::caption_shape:
      return kCaptionShapeRows + slot.index * kCaptionVocab;
    case SlotFamily::box_coord:
      return kBoxRows + slot.index * kCoordVocab;
    case SlotFamily::answer:
      return kAnswerRows;
  }
  return 0;
}

reward::OutputMode mode_from_observation(std::span<const double> obs) {
  return obs[kModeFlag] > 0.5 ? reward::OutputMode::CaptionBoxAnswer
                              : reward::OutputMode::BoxAnswerCaption;
}

// Feature dims a slot family conditions on. Caption slots read their own
// cell, box slots the query-match map, the answer head only sees the scene
// through the sampled box, so localization gates answer accuracy.
std::vector<int> slot_feature_dims(const Slot& slot) {
  std::vector<int> dims;
  switch (slot.family) {
    case SlotFamily::caption_color:
    case SlotFamily::caption_shape:
      for (int f = 0; f < 7; ++f) dims.push_back(kSceneBlock + 7 * slot.index + f);
      break;
    case SlotFamily::box_coord:
      for (int c = 0; c < kCellCount; ++c) dims.push_back(kMatchBlock + c);
      for (int f = 0; f < 8; ++f) dims.push_back(kQuestionBlock + f);
      break;
    case SlotFamily::answer:
      for (int f = 0; f < 2 * kAttrCount; ++f) dims.push_back(kBoxAttrBlock + f);
      for (int f = 0; f < 8; ++f) dims.push_back(kQuestionBlock + f);
      break;
  }
  dims.push_back(kBiasFlag);
  return dims;
}

// Cell the sampled box points at: the cell containing the box center, or
// -1 when the center lies outside the grid.
int designated_cell(std::span<const int> box_tokens) {
  const double cx = 0.5 * kCellPixels * (box_tokens[0] + box_tokens[2]);
  const double cy = 0.5 * kCellPixels * (box_tokens[1] + box_tokens[3]);
  const int col = static_cast<int>(std::floor(cx / kCellPixels));
  const int row = static_cast<int>(std::floor(cy / kCellPixels));
  if (col < 0 || col >= kGridCells || row < 0 || row >= kGridCells) return -1;
  return row * kGridCells + col;
}

// Fills the attribute-under-box block from the scene encoded in obs itself.
void fill_box_attr_block(std::vector<double>& obs, std::span<const int> box_tokens) {
  std::fill(obs.begin() + kBoxAttrBlock, obs.begin() + kBoxAttrBlock + 2 * kAttrCount, 0.0);
  const int cell = designated_cell(box_tokens);
  if (cell < 0) return;
  const int base = kSceneBlock + 7 * cell;
  if (obs[base] < 0.5) return;  // empty cell
  int shape = 0, color = 0;
  for (int s = 0; s < kShapeCount; ++s) {
    if (obs[base + 1 + s] > 0.5) shape = s;
  }
  for (int c = 0; c < kColorCount; ++c) {
    if (obs[base + 4 + c] > 0.5) color = c;
  }
  const bool asks_color = obs[kQuestionBlock] > 0.5;
  obs[kBoxAttrBlock + color] = 1.0;
  obs[kBoxAttrBlock + kColorCount + shape] = 1.0;
  const int kind_value = asks_color ? color : kColorCount + shape;
  obs[kBoxAttrBlock + kAttrCount + kind_value] = 1.0;
}

// Walks the slot plan applying fn(slot, features) per position; refreshes
// the box-attribute block once all four box tokens are known. The walk is
// shared by the sampler, the scorer and the gradient so the three always
// see identical features.
template <typename Fn>
void walk_plan(std::span<const double> observation, std::span<const int> tokens,
               std::size_t limit, Fn&& fn) {
  const auto mode = mode_from_observation(observation);
  const auto plan = slot_plan(mode, /*early_stop=*/false);
  std::vector<double> obs(observation.begin(), observation.end());
  std::array<int, 4> box_tokens{};
  int box_seen = 0;
  for (std::size_t t = 0; t < limit && t < plan.size(); ++t) {
    fn(t, plan[t], obs);
    if (t < tokens.size() && plan[t].family == SlotFamily::box_coord) {
      box_tokens[plan[t].index] = tokens[t];
      if (++box_seen == 4) fill_box_attr_block(obs, box_tokens);
    }
  }
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

}  // namespace

ToyPolicy::ToyPolicy() : weights_(static_cast<std::size_t>(kTotalRows) * kObsDim, 0.0) {}

std::vector<double> ToyPolicy::slot_log_probs(
    const Slot& slot, std::span<const double> features) const {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  const int vocab = slot_vocab_size(slot);
  const int base = slot_row_base(slot);
  const auto dims = slot_feature_dims(slot);
  std::vector<double> logits(vocab, 0.0);
  for (int v = 0; v < vocab; ++v) {
    const double* row = weights_.data() + static_cast<std::size_t>(base + v) * kObsDim;
    double dot = 0.0;
    for (int f : dims) dot += row[f] * features[f];
    logits[v] = dot / temperature;
  }
  const double lse = log_sum_exp(logits);
  for (double& l : logits) l -= lse;
  return logits;
}

std::vector<double> ToyPolicy::token_log_probs(std::span<const double> observation,
                                               std::span<const int> tokens) const {
  std::vector<double> out(tokens.size(), 0.0);
  walk_plan(observation, tokens, tokens.size(),
            [&](std::size_t t, const Slot& slot, const std::vector<double>& obs) {
              const auto logp = slot_log_probs(slot, obs);
              const int token = tokens[t];
              if (token < 0 || token >= static_cast<int>(logp.size())) {
                throw std::invalid_argument("token out of vocabulary");
              }
              out[t] = logp[token];
            });
  return out;
}

void ToyPolicy::accumulate_log_prob_gradient(std::span<const double> observation,
                                             std::span<const int> tokens,
                                             std::span<const double> coefficients,
                                             std::span<double> grad) const {
  if (coefficients.size() != tokens.size()) {
    throw std::invalid_argument("one coefficient per token required");
  }
  if (grad.size() != weights_.size()) {
    throw std::invalid_argument("gradient size mismatch");
  }
  walk_plan(observation, tokens, tokens.size(),
            [&](std::size_t t, const Slot& slot, const std::vector<double>& obs) {
              const auto logp = slot_log_probs(slot, obs);
              const int vocab = static_cast<int>(logp.size());
              const int base = slot_row_base(slot);
              const auto dims = slot_feature_dims(slot);
              const double coef = coefficients[t];
              if (coef == 0.0) return;
              // d log pi(v) / d W[u,f] = ((1[u=v] - p_u) / T) * x_f
              for (int u = 0; u < vocab; ++u) {
                const double p = std::exp(logp[u]);
                const double w =
                    coef * (((u == tokens[t]) ? 1.0 : 0.0) - p) / temperature;
                if (w == 0.0) continue;
                double* row = grad.data() + static_cast<std::size_t>(base + u) * kObsDim;
                for (int f : dims) row[f] += w * obs[f];
              }
            });
}

namespace {

int sample_from_log_probs(std::span<const double> logp, int top_k, double top_p,
                          Rng& rng) {
  const int vocab = static_cast<int>(logp.size());
  std::vector<int> order(vocab);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return logp[a] > logp[b]; });

  int keep = vocab;
  if (top_k > 0) keep = std::min(keep, top_k);
  if (top_p < 1.0) {
    double cum = 0.0;
    for (int i = 0; i < keep; ++i) {
      cum += std::exp(logp[order[i]]);
      if (cum >= top_p) {
        keep = i + 1;
        break;
      }
    }
  }
  double mass = 0.0;
  for (int i = 0; i < keep; ++i) mass += std::exp(logp[order[i]]);
  double u = rng.next_double() * mass;
  for (int i = 0; i < keep; ++i) {
    u -= std::exp(logp[order[i]]);
    if (u <= 0.0) return order[i];
  }
  return order[keep - 1];
}

std::string render_caption(std::span<const int> tokens, std::size_t caption_pos) {
  // caption slots are (color, shape) pairs per cell, row-major
  std::string caption;
  for (int cell = 0; cell < kCellCount; ++cell) {
    const int color = tokens[caption_pos + 2 * cell];
    const int shape = tokens[caption_pos + 2 * cell + 1];
    if (color == kNoneToken && shape == kNoneToken) continue;
    std::string phrase = "a";
    if (color != kNoneToken) phrase += " " + kColorNames[color];
    if (shape != kNoneToken) phrase += " " + kShapeNames[shape];
    phrase += " in cell " + std::to_string(cell);
    if (!caption.empty()) caption += " ; ";
    caption += phrase;
  }
  return caption;
}

}  // namespace

std::string render_tokens(std::span<const int> tokens, reward::OutputMode mode,
                          bool early_stop) {
  const auto plan = slot_plan(mode, early_stop);
  if (tokens.size() != plan.size()) {
    throw std::invalid_argument("token count does not match the slot plan");
  }
  std::size_t caption_pos = 0, box_pos = 0, answer_pos = 0;
  bool has_caption = false;
  for (std::size_t t = 0; t < plan.size(); ++t) {
    if (plan[t].family == SlotFamily::caption_color && plan[t].index == 0) {
      caption_pos = t;
      has_caption = true;
    } else if (plan[t].family == SlotFamily::box_coord && plan[t].index == 0) {
      box_pos = t;
    } else if (plan[t].family == SlotFamily::answer) {
      answer_pos = t;
    }
  }
  const auto box_text = [&] {
    std::string body = "[[";
    for (int axis = 0; axis < 4; ++axis) {
      if (axis > 0) body += ",";
      body += std::to_string(tokens[box_pos + axis] * kCellPixels);
    }
    return body + "]]";
  };

  std::string raw;
  auto emit = [&](reward::Field field) {
    switch (field) {
      case reward::Field::caption:
        if (has_caption) {
          raw += "<caption>" + render_caption(tokens, caption_pos) + "</caption>";
        }
        break;
      case reward::Field::bbox:
        raw += "<bbox>" + box_text() + "</bbox>";
        break;
      case reward::Field::answer:
        raw += "<answer>" + kAttrNames[tokens[answer_pos]] + "</answer>";
        break;
    }
  };
  for (reward::Field field : reward::canonical_order(mode)) emit(field);
  return raw;
}

std::vector<int> gold_tokens(const Task& task, reward::OutputMode mode,
                             bool early_stop) {
  const auto plan = slot_plan(mode, early_stop);
  std::vector<int> tokens(plan.size(), 0);
  const SceneObject& target = task.scene.objects[task.target_index];
  for (std::size_t t = 0; t < plan.size(); ++t) {
    const Slot& slot = plan[t];
    switch (slot.family) {
      case SlotFamily::caption_color: {
        const SceneObject* obj = task.scene.object_at(slot.index);
        tokens[t] = obj ? obj->color : kNoneToken;
        break;
      }
      case SlotFamily::caption_shape: {
        const SceneObject* obj = task.scene.object_at(slot.index);
        tokens[t] = obj ? obj->shape : kNoneToken;
        break;
      }
      case SlotFamily::box_coord:
        switch (slot.index) {
          case 0: tokens[t] = target.col; break;
          case 1: tokens[t] = target.row; break;
          case 2: tokens[t] = target.col + 1; break;
          default: tokens[t] = target.row + 1; break;
        }
        break;
      case SlotFamily::answer:
        tokens[t] = task.kind == QuestionKind::color_of_shape
                        ? target.color
                        : kColorCount + target.shape;
        break;
    }
  }
  return tokens;
}

RolloutSample rollout(const ToyPolicy& policy, const Task& task,
                      reward::OutputMode mode, bool early_stop,
                      std::uint64_t rng_seed, bool greedy) {
  const auto obs = build_observation(task, mode);
  const auto plan = slot_plan(mode, early_stop);
  Rng rng(mix_seed({kRollTag, rng_seed}));

  RolloutSample sample;
  sample.tokens.resize(plan.size());
  sample.log_probs.resize(plan.size());
  walk_plan(obs, sample.tokens, plan.size(),
            [&](std::size_t t, const Slot& slot, const std::vector<double>& features) {
              const auto logp = policy.slot_log_probs(slot, features);
              int token;
              if (greedy) {
                token = static_cast<int>(std::distance(
                    logp.begin(), std::max_element(logp.begin(), logp.end())));
              } else {
                token = sample_from_log_probs(logp, policy.top_k, policy.top_p, rng);
              }
              sample.tokens[t] = token;
              sample.log_probs[t] = logp[token];
            });
  sample.raw = render_tokens(sample.tokens, mode, early_stop);
  return sample;
}

Evaluation evaluate(const ToyPolicy& policy, int n, std::uint64_t seed,
                    reward::OutputMode mode, bool early_stop,
                    const reward::Weights& weights) {
  if (n < 1) throw std::invalid_argument("evaluate needs n >= 1");
  Evaluation eval;
  eval.samples = n;
  for (int i = 0; i < n; ++i) {
    const Task task = generate_task(mix_seed({kEvalTag, seed, static_cast<std::uint64_t>(i)}));
    const RolloutSample sample =
        rollout(policy, task, mode, early_stop, /*rng_seed=*/0, /*greedy=*/true);
    const auto parsed = reward::parse_structured(sample.raw, mode);
    const auto breakdown = reward::compose_reward(
        parsed, {task.gold_caption, {task.gold_box}, task.gold_answer}, weights, mode);
    eval.accuracy += breakdown.r_acc;
    eval.mean_caption += breakdown.r_caption;
    eval.mean_bbox += breakdown.r_bbox;
    eval.mean_acc += breakdown.r_acc;
    eval.mean_format += breakdown.r_format;
    eval.mean_total += breakdown.total;
    eval.mean_tokens += static_cast<double>(sample.tokens.size());
  }
  const double dn = static_cast<double>(n);
  eval.accuracy /= dn;
  eval.mean_caption /= dn;
  eval.mean_bbox /= dn;
  eval.mean_acc /= dn;
  eval.mean_format /= dn;
  eval.mean_total /= dn;
  eval.mean_tokens /= dn;
  return eval;
}

std::optional<int> TrainResult::first_step_at_accuracy(double threshold) const {
  for (const EvalRecord& record : evals) {
    if (record.eval.accuracy >= threshold) return record.step;
  }
  return std::nullopt;
}

namespace {

nlohmann::json mean_reward_json(const std::array<double, 4>& components,
                                double total) {
  return {{"caption", components[0]},
          {"bbox", components[1]},
          {"acc", components[2]},
          {"format", components[3]},
          {"total", total}};
}

}  // namespace

TrainResult train(const TrainOptions& options, std::ostream* log) {
  reward::validate_weights(options.weights);
  if (options.steps < 0) throw std::invalid_argument("steps must be >= 0");

  TrainResult result;
  result.policy.temperature = options.temperature;
  result.policy.top_k = options.top_k;
  result.policy.top_p = options.top_p;
  const ToyPolicy reference = result.policy;  // frozen initial policy

  const auto started = std::chrono::steady_clock::now();
  for (int step = 0; step < options.steps; ++step) {
    const Task task = generate_task(
        mix_seed({kTrainTag, options.seed, static_cast<std::uint64_t>(step)}));

    grpo::GroupBatch batch;
    batch.query_id = "step-" + std::to_string(step);
    batch.observation = build_observation(task, options.mode);

    StepRecord record;
    record.step = step;
    std::vector<double> totals;
    for (int i = 0; i < options.grpo.group_size; ++i) {
      const RolloutSample sample = rollout(
          result.policy, task, options.mode, /*early_stop=*/false,
          mix_seed({kRollTag, options.seed, static_cast<std::uint64_t>(step),
                    static_cast<std::uint64_t>(i)}));
      const auto parsed = reward::parse_structured(sample.raw, options.mode);
      const auto breakdown = reward::compose_reward(
          parsed, {task.gold_caption, {task.gold_box}, task.gold_answer},
          options.weights, options.mode);

      grpo::Rollout rollout_record;
      rollout_record.tokens = sample.tokens;
      rollout_record.logp.current = sample.log_probs;
      rollout_record.logp.behavior = sample.log_probs;
      rollout_record.logp.reference =
          reference.token_log_probs(batch.observation, sample.tokens);
      rollout_record.reward = breakdown.total;
      batch.rollouts.push_back(std::move(rollout_record));

      record.components.push_back(breakdown.components());
      totals.push_back(breakdown.total);
      record.mean_tokens += static_cast<double>(sample.tokens.size());
    }

    const double group = static_cast<double>(options.grpo.group_size);
    record.mean_tokens /= group;
    for (const auto& c : record.components) {
      for (std::size_t k = 0; k < 4; ++k) record.mean_components[k] += c[k];
    }
    for (auto& m : record.mean_components) m /= group;
    double mean_total = 0.0;
    for (double t : totals) mean_total += t;
    mean_total /= group;
    record.mean_total = mean_total;
    for (double t : totals) {
      record.reward_variance += (t - mean_total) * (t - mean_total);
    }
    record.reward_variance /= group;

    for (int epoch = 0; epoch < std::max(1, options.grpo.epochs); ++epoch) {
      const auto report = grpo::grpo_step(result.policy, batch, options.grpo);
      if (epoch == 0) {
        record.objective = report.objective;
        record.grad_norm = report.gradient_norm;
      }
    }

    if (log) {
      nlohmann::json line{
          {"type", "step"},
          {"step", record.step},
          {"mean_reward", mean_reward_json(record.mean_components, record.mean_total)},
          {"reward_variance", record.reward_variance},
          {"objective", record.objective},
          {"grad_norm", record.grad_norm},
          {"mean_tokens", record.mean_tokens},
          {"components", record.components},
      };
      if (options.timing) {
        line["wall_clock_ms"] =
            std::chrono::duration<double, std::milli>(
                std::chrono::steady_clock::now() - started)
                .count();
      }
      *log << line.dump() << "\n";
    }
    result.steps.push_back(std::move(record));

    if (options.eval_every > 0 && (step + 1) % options.eval_every == 0) {
      EvalRecord eval_record;
      eval_record.step = step + 1;
      eval_record.eval = evaluate(result.policy, options.eval_n, options.seed,
                                  options.mode, options.early_stop, options.weights);
      if (log) {
        nlohmann::json line{
            {"type", "eval"},
            {"step", eval_record.step},
            {"accuracy", eval_record.eval.accuracy},
            {"mean_tokens", eval_record.eval.mean_tokens},
            {"mean_reward",
             mean_reward_json({eval_record.eval.mean_caption, eval_record.eval.mean_bbox,
                               eval_record.eval.mean_acc, eval_record.eval.mean_format},
                              eval_record.eval.mean_total)},
        };
        *log << line.dump() << "\n";
      }
      result.evals.push_back(std::move(eval_record));
    }
  }

  result.final_eval = evaluate(result.policy, options.final_eval_n, options.seed,
                               options.mode, options.early_stop, options.weights);
  return result;
}

}  // namespace satori::toy
