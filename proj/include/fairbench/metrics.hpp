#pragma once

#include "fairbench/dataset.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace fairbench {

/// A metric that may be undefined (empty group, zero denominator).
using MetricValue = std::optional<double>;

/// Legal red line for disparate impact.
inline constexpr double kDisparateImpactThreshold = 0.8;
inline constexpr int kDefaultConsistencyNeighbors = 5;

/// Weighted fraction of `values == 1`, overall or restricted to one group.
/// Throws UndefinedMetric if the selection carries zero weight.
double weighted_positive_rate(const Eigen::Ref<const IntVector>& values,
                              const Eigen::Ref<const IntVector>& sensitive,
                              const Eigen::Ref<const Vector>& weights,
                              std::optional<Group> group = std::nullopt);

/// Pr(Y=1 | S=0) / Pr(Y=1 | S=1). Returns +infinity when the privileged rate
/// is zero and the unprivileged rate is positive; 0/0 throws UndefinedMetric.
double rate_ratio(const Eigen::Ref<const IntVector>& values,
                  const Eigen::Ref<const IntVector>& sensitive,
                  const Eigen::Ref<const Vector>& weights);
double rate_difference(const Eigen::Ref<const IntVector>& values,
                       const Eigen::Ref<const IntVector>& sensitive,
                       const Eigen::Ref<const Vector>& weights);

double base_rate(const TabularDataset& ds, std::optional<Group> group = std::nullopt);
double disparate_impact(const TabularDataset& ds);
double statistical_parity_difference(const TabularDataset& ds);

struct LabelCounts {
  Index positives = 0;
  Index negatives = 0;
};
LabelCounts count_labels(const TabularDataset& ds);

/// Smoothed differential fairness of the label (Dirichlet concentration 1):
/// max over y of |ln(p(y|S=0) / p(y|S=1))| with p(y|s) built from
/// weight-summed counts. Unit weights give the plain count version.
double empirical_difference(const Eigen::Ref<const IntVector>& labels,
                            const Eigen::Ref<const IntVector>& sensitive,
                            const Eigen::Ref<const Vector>& weights);
double empirical_difference(const Eigen::Ref<const IntVector>& labels,
                            const Eigen::Ref<const IntVector>& sensitive);
double empirical_difference(const TabularDataset& ds);

/// k nearest neighbours of every row by Euclidean distance, self excluded,
/// ties (distances within a relative 1e-9) broken toward the lower index.
std::vector<std::vector<Index>> nearest_neighbors(const Matrix& points, int k);

/// Column z-scores (population std); constant columns become zero.
Matrix standardize_columns(const Matrix& x);

/// 1 - mean_i |y_i - mean of y over kNN(i)|. Unweighted.
double consistency(const Matrix& features, const Eigen::Ref<const IntVector>& labels, int k,
                   ConsistencyScaling scaling = ConsistencyScaling::ZScore);
double consistency(const TabularDataset& ds, int k = kDefaultConsistencyNeighbors);

enum class Rate { TPR, FPR, TNR, FNR };
const char* to_string(Rate r);

/// Weighted confusion totals.
struct ConfusionCounts {
  double tp = 0.0, fp = 0.0, tn = 0.0, fn = 0.0;
};

struct GroupConfusion {
  std::array<ConfusionCounts, 2> groups;
  ConfusionCounts overall;

  /// Throws UndefinedMetric naming the group and rate on a zero denominator.
  double rate(Rate r, std::optional<Group> group = std::nullopt) const;
};

GroupConfusion group_confusion(const Eigen::Ref<const IntVector>& y_true,
                               const Eigen::Ref<const IntVector>& y_pred,
                               const Eigen::Ref<const IntVector>& sensitive,
                               const Eigen::Ref<const Vector>& weights);

/// (TPR + TNR) / 2 on the pooled confusion.
double balanced_accuracy(const GroupConfusion& c);
/// TPR_unprivileged - TPR_privileged.
double equal_opportunity_difference(const GroupConfusion& c);
/// ((FPR_u - FPR_p) + (TPR_u - TPR_p)) / 2.
double average_odds_difference(const GroupConfusion& c);

/// Generalized entropy index with alpha = 1 over benefits b = y_pred - y_true + 1.
/// Zero (with a warning) when every benefit is zero.
template <typename DerivedT, typename DerivedP>
double theil_index(const Eigen::DenseBase<DerivedT>& y_true,
                   const Eigen::DenseBase<DerivedP>& y_pred);

/// Bundle of the seven data-level metrics. Fields that cannot be computed are
/// empty and the reason is appended to `issues`.
struct DatasetMetrics {
  double base_rate = 0.0;
  std::array<MetricValue, 2> group_base_rates;
  MetricValue consistency;
  MetricValue disparate_impact;
  MetricValue statistical_parity_difference;
  Index num_positives = 0;
  Index num_negatives = 0;
  MetricValue empirical_difference;
  std::vector<std::string> issues;

  friend bool operator==(const DatasetMetrics&, const DatasetMetrics&) = default;
};

DatasetMetrics dataset_metrics(const TabularDataset& ds, int k = kDefaultConsistencyNeighbors);

struct RateSet {
  MetricValue tpr, fpr, tnr, fnr;
  friend bool operator==(const RateSet&, const RateSet&) = default;
};

struct ClassificationMetrics {
  double threshold = 0.5;
  MetricValue balanced_accuracy;
  MetricValue statistical_parity_difference;
  MetricValue disparate_impact;
  MetricValue equal_opportunity_difference;
  MetricValue average_odds_difference;
  MetricValue theil_index;
  /// Indexed by group (0 = unprivileged).
  std::array<RateSet, 2> group_rates;
  RateSet overall_rates;
  std::vector<std::string> issues;

  friend bool operator==(const ClassificationMetrics&, const ClassificationMetrics&) = default;
};

/// Predictions are y_pred_i = [score_i >= threshold].
IntVector threshold_scores(const Eigen::Ref<const Vector>& scores, double threshold);

ClassificationMetrics classification_metrics(const Eigen::Ref<const IntVector>& y_true,
                                             const Eigen::Ref<const Vector>& scores,
                                             double threshold,
                                             const Eigen::Ref<const IntVector>& sensitive,
                                             const Eigen::Ref<const Vector>& weights);

/// Fairness metrics a threshold can be selected against.
enum class FairnessMetric { SPD, DI, EOD, AOD, Theil };
FairnessMetric parse_fairness_metric(std::string_view name);
const char* to_string(FairnessMetric m);
MetricValue metric_value(const ClassificationMetrics& m, FairnessMetric which);

// ---------------------------------------------------------------------------

void warn_degenerate_theil();

template <typename DerivedT, typename DerivedP>
double theil_index(const Eigen::DenseBase<DerivedT>& y_true,
                   const Eigen::DenseBase<DerivedP>& y_pred) {
  const Index n = y_true.size();
  if (n < 1 || y_pred.size() != n) throw UndefinedMetric("theil index: empty or mismatched input");
  const Eigen::ArrayXd benefit = (y_pred.derived().template cast<double>() -
                                   y_true.derived().template cast<double>())
                                      .array() +
                                  1.0;
  const double mu = benefit.mean();
  if (mu == 0.0) {
    warn_degenerate_theil();
    return 0.0;
  }
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double r = benefit(i) / mu;
    if (r > 0.0) total += r * std::log(r);
  }
  return total / static_cast<double>(n);
}

}  // namespace fairbench
