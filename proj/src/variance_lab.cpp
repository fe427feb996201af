#include "satori/variance_lab.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace satori::variance {

void RewardSampleMatrix::validate() const {
  for (const auto& row : rows) {
    if (row.size() != component_count()) {
      throw std::invalid_argument("ragged reward sample row");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite reward sample");
    }
  }
  if (!group_labels.empty() && group_labels.size() != rows.size()) {
    throw std::invalid_argument("group labels must match row count");
  }
}

double weighted_variance(std::span<const double> vars,
                         const std::vector<std::vector<double>>& cov,
                         std::span<const double> weights) {
  const std::size_t k = vars.size();
  if (cov.size() != k || weights.size() != k) {
    throw std::invalid_argument("weighted_variance dims disagree");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (cov[i].size() != k) throw std::invalid_argument("covariance not square");
    if (vars[i] < 0.0) throw std::invalid_argument("negative variance");
    if (std::abs(cov[i][i] - vars[i]) > 1e-9) {
      throw std::invalid_argument("covariance diagonal disagrees with vars");
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      if (std::abs(cov[i][j] - cov[j][i]) > 1e-9) {
        throw std::invalid_argument("covariance must be symmetric");
      }
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += weights[i] * weights[i] * vars[i];
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      total += 2.0 * weights[i] * weights[j] * cov[i][j];
    }
  }
  return total;
}

std::vector<std::vector<double>> empirical_cov(const RewardSampleMatrix& samples) {
  samples.validate();
  const std::size_t n = samples.rows.size();
  const std::size_t k = samples.component_count();
  if (n < 2) throw std::invalid_argument("empirical_cov needs >= 2 rows");

  std::vector<double> mean(k, 0.0);
  for (const auto& row : samples.rows) {
    for (std::size_t c = 0; c < k; ++c) mean[c] += row[c];
  }
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<std::vector<double>> cov(k, std::vector<double>(k, 0.0));
  for (const auto& row : samples.rows) {
    for (std::size_t i = 0; i < k; ++i) {
      const double di = row[i] - mean[i];
      for (std::size_t j = i; j < k; ++j) {
        cov[i][j] += di * (row[j] - mean[j]);
      }
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      cov[i][j] /= static_cast<double>(n);  // population moments
      cov[j][i] = cov[i][j];
    }
  }
  return cov;
}

namespace {

double population_variance(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return var / n;
}

}  // namespace

DecompositionReport total_variance_decomposition(
    std::span<const double> values, std::span<const std::string> groups) {
  if (values.empty()) throw std::invalid_argument("decomposition of empty input");
  if (values.size() != groups.size()) {
    throw std::invalid_argument("values and group labels must align");
  }
  std::map<std::string, std::vector<double>> by_group;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw std::invalid_argument("non-finite value");
    by_group[groups[i]].push_back(values[i]);
  }

  const double n = static_cast<double>(values.size());
  double grand_mean = 0.0;
  for (double v : values) grand_mean += v;
  grand_mean /= n;

  DecompositionReport report;
  report.total_variance = population_variance(values);
  for (const auto& [label, members] : by_group) {
    const double weight = static_cast<double>(members.size()) / n;
    double group_mean = 0.0;
    for (double v : members) group_mean += v;
    group_mean /= static_cast<double>(members.size());
    double within = 0.0;
    for (double v : members) within += (v - group_mean) * (v - group_mean);
    within /= static_cast<double>(members.size());
    report.intra_variance += weight * within;
    report.inter_variance += weight * (group_mean - grand_mean) * (group_mean - grand_mean);
  }
  return report;
}

DecompositionReport diversification_report(const RewardSampleMatrix& samples,
                                           std::span<const double> weights,
                                           std::size_t baseline_component) {
  samples.validate();
  const std::size_t k = samples.component_count();
  if (weights.size() != k) throw std::invalid_argument("weight count mismatch");
  if (baseline_component >= k) throw std::invalid_argument("baseline out of range");

  const auto cov = empirical_cov(samples);
  std::vector<double> vars(k);
  for (std::size_t c = 0; c < k; ++c) vars[c] = cov[c][c];
  if (vars[baseline_component] <= 0.0) {
    throw std::invalid_argument("baseline component has zero variance");
  }

  std::vector<double> composite(samples.rows.size(), 0.0);
  for (std::size_t r = 0; r < samples.rows.size(); ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      composite[r] += weights[c] * samples.rows[r][c];
    }
  }

  DecompositionReport report;
  if (!samples.group_labels.empty()) {
    report = total_variance_decomposition(composite, samples.group_labels);
  } else {
    report.total_variance = population_variance(composite);
  }
  report.component_names = samples.component_names;
  report.component_variances = vars;
  report.covariance = cov;
  report.composite_variance = weighted_variance(vars, cov, weights);
  report.baseline_component = baseline_component;
  report.reduction_ratio =
      1.0 - report.composite_variance / vars[baseline_component];
  return report;
}

}  // namespace satori::variance
