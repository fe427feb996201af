#include "satori/grpo_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace satori::grpo {

namespace {

void validate_config(const GrpoConfig& cfg) {
  if (cfg.group_size < 2) throw std::invalid_argument("group_size must be >= 2");
  if (!(cfg.clip_eps > 0.0 && cfg.clip_eps < 1.0)) {
    throw std::invalid_argument("clip_eps must lie in (0, 1)");
  }
  if (cfg.kl_coef < 0.0) throw std::invalid_argument("kl_coef must be >= 0");
  if (!(cfg.adv_eps > 0.0)) throw std::invalid_argument("adv_eps must be > 0");
}

void validate_batch(const GroupBatch& batch) {
  if (batch.rollouts.size() < 2) {
    throw std::invalid_argument("a group needs at least 2 rollouts");
  }
  for (const Rollout& r : batch.rollouts) {
    if (r.tokens.empty()) throw std::invalid_argument("empty rollout");
    if (r.logp.current.size() != r.tokens.size() ||
        r.logp.behavior.size() != r.tokens.size() ||
        r.logp.reference.size() != r.tokens.size()) {
      throw std::invalid_argument("log-prob sequences must align with tokens");
    }
    if (!std::isfinite(r.reward)) throw std::invalid_argument("non-finite reward");
  }
}

std::vector<double> batch_rewards(const GroupBatch& batch) {
  std::vector<double> rewards;
  rewards.reserve(batch.rollouts.size());
  for (const Rollout& r : batch.rollouts) rewards.push_back(r.reward);
  return rewards;
}

// Objective over explicit per-token current log-probs (either the stored
// ones or policy re-evaluations).
double objective_impl(const GroupBatch& batch, const GrpoConfig& cfg,
                      const std::vector<std::vector<double>>& current) {
  const auto rewards = batch_rewards(batch);
  const auto advantages = group_normalize(rewards, cfg.adv_eps);
  const std::size_t group = batch.rollouts.size();

  double objective = 0.0;
  for (std::size_t i = 0; i < group; ++i) {
    const Rollout& rollout = batch.rollouts[i];
    const std::size_t len = rollout.tokens.size();
    double rollout_sum = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double ratio = std::exp(current[i][t] - rollout.logp.behavior[t]);
      rollout_sum += clipped_term(ratio, advantages[i], cfg.clip_eps);
      rollout_sum -= cfg.kl_coef * kl_term(current[i][t], rollout.logp.reference[t]);
    }
    objective += rollout_sum / static_cast<double>(len);
  }
  return objective / static_cast<double>(group);
}

}  // namespace

std::vector<double> group_normalize(std::span<const double> rewards,
                                    double adv_eps) {
  if (rewards.size() < 2) {
    throw std::invalid_argument("group_normalize needs at least 2 rewards");
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;  // population variance, no Bessel correction
  const double std_dev = std::sqrt(var);

  std::vector<double> advantages(rewards.size(), 0.0);
  if (std_dev < adv_eps) return advantages;  // degenerate group
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    advantages[i] = (rewards[i] - mean) / std_dev;
  }
  return advantages;
}

double clipped_term(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double kl_term(double logp_current, double logp_reference) {
  const double d = logp_reference - logp_current;
  return std::exp(d) - d - 1.0;
}

double grpo_objective(const GroupBatch& batch, const GrpoConfig& cfg) {
  validate_config(cfg);
  validate_batch(batch);
  std::vector<std::vector<double>> current;
  current.reserve(batch.rollouts.size());
  for (const Rollout& r : batch.rollouts) current.push_back(r.logp.current);
  return objective_impl(batch, cfg, current);
}

namespace {

std::vector<std::vector<double>> reevaluate_current(
    const DifferentiablePolicy& policy, const GroupBatch& batch) {
  std::vector<std::vector<double>> current;
  current.reserve(batch.rollouts.size());
  for (const Rollout& r : batch.rollouts) {
    current.push_back(policy.token_log_probs(batch.observation, r.tokens));
  }
  return current;
}

}  // namespace

double objective_with_policy(const DifferentiablePolicy& policy,
                             const GroupBatch& batch, const GrpoConfig& cfg) {
  validate_config(cfg);
  validate_batch(batch);
  return objective_impl(batch, cfg, reevaluate_current(policy, batch));
}

std::vector<double> objective_gradient(const DifferentiablePolicy& policy,
                                       const GroupBatch& batch,
                                       const GrpoConfig& cfg) {
  validate_config(cfg);
  validate_batch(batch);
  const auto current = reevaluate_current(policy, batch);
  const auto rewards = batch_rewards(batch);
  const auto advantages = group_normalize(rewards, cfg.adv_eps);
  const std::size_t group = batch.rollouts.size();

  std::vector<double> grad(policy.parameter_count(), 0.0);
  std::vector<double> coefficients;
  for (std::size_t i = 0; i < group; ++i) {
    const Rollout& rollout = batch.rollouts[i];
    const std::size_t len = rollout.tokens.size();
    const double scale = 1.0 / (static_cast<double>(group) * static_cast<double>(len));
    coefficients.assign(len, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
      const double ratio = std::exp(current[i][t] - rollout.logp.behavior[t]);
      const double clipped =
          std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
      // d/dh min(h*A, clip(h)*A) is A on the unclipped branch, 0 once the
      // clipped branch is strictly better; dh/dtheta = h * dlogp/dtheta.
      double coef = 0.0;
      if (ratio * advantages[i] <= clipped * advantages[i]) {
        coef += advantages[i] * ratio;
      }
      // -kl_coef * d/dtheta [exp(d) - d - 1], d = ref - cur
      const double d = rollout.logp.reference[t] - current[i][t];
      coef += cfg.kl_coef * (std::exp(d) - 1.0);
      coefficients[t] = scale * coef;
    }
    policy.accumulate_log_prob_gradient(batch.observation, rollout.tokens,
                                        coefficients, grad);
  }
  return grad;
}

StepReport grpo_step(DifferentiablePolicy& policy, const GroupBatch& batch,
                     const GrpoConfig& cfg) {
  StepReport report;
  report.objective = objective_with_policy(policy, batch, cfg);
  const auto grad = objective_gradient(policy, batch, cfg);

  double norm_sq = 0.0;
  for (double g : grad) norm_sq += g * g;
  report.gradient_norm = std::sqrt(norm_sq);

  auto params = policy.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    params[p] += cfg.learning_rate * grad[p];
  }
  return report;
}

}  // namespace satori::grpo
