#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace satori::variance {

// Per-trajectory reward samples: one row per trajectory, one column per
// reward component, plus optional group labels (e.g. the training step a
// group of rollouts came from).
struct RewardSampleMatrix {
  std::vector<std::string> component_names;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> group_labels;  // empty or one label per row

  std::size_t component_count() const { return component_names.size(); }
  // Throws std::invalid_argument on ragged rows, non-finite entries or
  // label/row count mismatch.
  void validate() const;
};

// Var(sum_i b_i X_i) = sum_i b_i^2 Var_i + 2 sum_{i<j} b_i b_j Cov_ij.
// Rejects asymmetric covariance or a diagonal that disagrees with vars.
double weighted_variance(std::span<const double> vars,
                         const std::vector<std::vector<double>>& cov,
                         std::span<const double> weights);

// Population covariance of the columns; needs >= 2 rows.
std::vector<std::vector<double>> empirical_cov(const RewardSampleMatrix& samples);

struct DecompositionReport {
  double total_variance = 0.0;
  double intra_variance = 0.0;  // mean within-group variance (size-weighted)
  double inter_variance = 0.0;  // variance of group means (size-weighted)
  std::vector<double> component_variances;
  std::vector<std::vector<double>> covariance;
  double composite_variance = 0.0;
  std::optional<double> reduction_ratio;           // vs baseline component
  std::optional<std::size_t> baseline_component;
  std::vector<std::string> component_names;
};

// Law-of-total-variance split of a per-row statistic over trajectory
// groups. Plug-in population estimators, so intra + inter = total exactly.
DecompositionReport total_variance_decomposition(
    std::span<const double> values, std::span<const std::string> groups);

// Component moments, composite variance of the weighted sum and the
// diversification reduction 1 - Var(composite)/Var(baseline). When group
// labels are present, the composite statistic is also decomposed.
DecompositionReport diversification_report(const RewardSampleMatrix& samples,
                                           std::span<const double> weights,
                                           std::size_t baseline_component);

}  // namespace satori::variance
