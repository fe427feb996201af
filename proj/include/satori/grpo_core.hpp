#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace satori::grpo {

struct GrpoConfig {
  int group_size = 16;
  double clip_eps = 0.2;
  double kl_coef = 0.05;
  double adv_eps = 1e-8;       // below this reward std the group is degenerate
  double learning_rate = 1e-6;
  int epochs = 1;              // batch reuse count; ratios leave 1 after pass one
};

struct TokenLogProbs {
  std::vector<double> current;    // pi_theta
  std::vector<double> behavior;   // pi_theta_old, the sampling policy
  std::vector<double> reference;  // pi_ref for the KL penalty
};

struct Rollout {
  std::vector<int> tokens;
  TokenLogProbs logp;
  double reward = 0.0;
};

// G rollouts for one query. The observation is the shared policy context a
// DifferentiablePolicy needs to re-evaluate token log-probabilities.
struct GroupBatch {
  std::string query_id;
  std::vector<double> observation;
  std::vector<Rollout> rollouts;
};

// Group-standardized advantages r~ = (r - mean) / std with the population
// std. Groups whose std falls below adv_eps get all-zero advantages.
std::vector<double> group_normalize(std::span<const double> rewards,
                                    double adv_eps);

// min(h * adv, clip(h, 1-eps, 1+eps) * adv)
double clipped_term(double ratio, double advantage, double clip_eps);

// Nonnegative per-token KL estimator exp(d) - d - 1 with
// d = logp_reference - logp_current; zero iff the log-probs agree.
double kl_term(double logp_current, double logp_reference);

// (1/G) sum_i (1/|o_i|) sum_t [clipped_term - kl_coef * kl_term], with
// per-rollout advantages broadcast uniformly across tokens. Throws on
// invalid configs, groups smaller than 2 or empty rollouts.
double grpo_objective(const GroupBatch& batch, const GrpoConfig& cfg);

// Minimal surface the optimizer needs from a policy: flat parameters,
// token log-probabilities for a sampled rollout, and accumulation of
// weighted log-probability gradients.
class DifferentiablePolicy {
 public:
  virtual ~DifferentiablePolicy() = default;

  virtual std::size_t parameter_count() const = 0;
  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;

  // Log-probability of each token under the current parameters.
  virtual std::vector<double> token_log_probs(
      std::span<const double> observation,
      std::span<const int> tokens) const = 0;

  // grad += sum_t coefficients[t] * d log pi(tokens[t]) / d theta
  virtual void accumulate_log_prob_gradient(
      std::span<const double> observation, std::span<const int> tokens,
      std::span<const double> coefficients, std::span<double> grad) const = 0;
};

// Objective with current log-probs re-evaluated under the policy, so the
// ratios move on batch reuse. Stored behavior/reference log-probs are kept.
double objective_with_policy(const DifferentiablePolicy& policy,
                             const GroupBatch& batch, const GrpoConfig& cfg);

// Analytic gradient of objective_with_policy at the current parameters.
std::vector<double> objective_gradient(const DifferentiablePolicy& policy,
                                       const GroupBatch& batch,
                                       const GrpoConfig& cfg);

struct StepReport {
  double objective = 0.0;      // before the update
  double gradient_norm = 0.0;  // L2
};

// One ascent step on the objective; parameters updated in place.
// Accumulation order is fixed by rollout index for reproducibility.
StepReport grpo_step(DifferentiablePolicy& policy, const GroupBatch& batch,
                     const GrpoConfig& cfg);

}  // namespace satori::grpo
