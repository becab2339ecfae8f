#include "fairbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fairbench {
namespace {

const char* group_name(Group g) {
  return g == Group::Privileged ? "privileged" : "unprivileged";
}

void check_lengths(Index n, std::initializer_list<Index> others) {
  for (Index m : others)
    if (m != n) throw Error("metric inputs have mismatched lengths");
}

template <typename Fn>
void capture(MetricValue& out, std::vector<std::string>& issues, const char* field, Fn&& fn) {
  try {
    const double v = fn();
    if (std::isfinite(v)) {
      out = v;
    } else {
      issues.push_back(std::string(field) + ": undefined ratio");
    }
  } catch (const UndefinedMetric& e) {
    issues.push_back(std::string(field) + ": " + e.what());
  }
}

}  // namespace

double weighted_positive_rate(const Eigen::Ref<const IntVector>& values,
                              const Eigen::Ref<const IntVector>& sensitive,
                              const Eigen::Ref<const Vector>& weights, std::optional<Group> group) {
  check_lengths(values.size(), {sensitive.size(), weights.size()});
  double total = 0.0;
  double positive = 0.0;
  for (Index i = 0; i < values.size(); ++i) {
    if (group && sensitive[i] != static_cast<int>(*group)) continue;
    total += weights[i];
    if (values[i] == 1) positive += weights[i];
  }
  if (!(total > 0.0))
    throw UndefinedMetric(group ? std::string("empty ") + group_name(*group) + " group"
                                : std::string("empty dataset"));
  return positive / total;
}

double rate_ratio(const Eigen::Ref<const IntVector>& values,
                  const Eigen::Ref<const IntVector>& sensitive,
                  const Eigen::Ref<const Vector>& weights) {
  const double unpriv = weighted_positive_rate(values, sensitive, weights, Group::Unprivileged);
  const double priv = weighted_positive_rate(values, sensitive, weights, Group::Privileged);
  if (priv == 0.0) {
    if (unpriv == 0.0) throw UndefinedMetric("disparate impact: both group rates are zero");
    return std::numeric_limits<double>::infinity();
  }
  return unpriv / priv;
}

double rate_difference(const Eigen::Ref<const IntVector>& values,
                       const Eigen::Ref<const IntVector>& sensitive,
                       const Eigen::Ref<const Vector>& weights) {
  return weighted_positive_rate(values, sensitive, weights, Group::Unprivileged) -
         weighted_positive_rate(values, sensitive, weights, Group::Privileged);
}

double base_rate(const TabularDataset& ds, std::optional<Group> group) {
  return weighted_positive_rate(ds.labels, ds.sensitive, ds.weights, group);
}

double disparate_impact(const TabularDataset& ds) {
  return rate_ratio(ds.labels, ds.sensitive, ds.weights);
}

double statistical_parity_difference(const TabularDataset& ds) {
  return rate_difference(ds.labels, ds.sensitive, ds.weights);
}

LabelCounts count_labels(const TabularDataset& ds) {
  const Index pos = ds.labels.sum();
  return {pos, ds.size() - pos};
}

double empirical_difference(const Eigen::Ref<const IntVector>& labels,
                            const Eigen::Ref<const IntVector>& sensitive,
                            const Eigen::Ref<const Vector>& weights) {
  check_lengths(labels.size(), {sensitive.size(), weights.size()});
  // counts[s][y], weight-summed
  double counts[2][2] = {{0, 0}, {0, 0}};
  for (Index i = 0; i < labels.size(); ++i) counts[sensitive[i]][labels[i]] += weights[i];
  constexpr double kConcentration = 1.0;
  constexpr double kClasses = 2.0;
  double worst = 0.0;
  for (int y = 0; y < 2; ++y) {
    double p[2];
    for (int s = 0; s < 2; ++s)
      p[s] = (counts[s][y] + kConcentration / kClasses) /
             (counts[s][0] + counts[s][1] + kConcentration);
    worst = std::max(worst, std::abs(std::log(p[0] / p[1])));
  }
  return worst;
}

double empirical_difference(const Eigen::Ref<const IntVector>& labels,
                            const Eigen::Ref<const IntVector>& sensitive) {
  return empirical_difference(labels, sensitive, Vector::Ones(labels.size()));
}

double empirical_difference(const TabularDataset& ds) {
  return empirical_difference(ds.labels, ds.sensitive, ds.weights);
}

Matrix standardize_columns(const Matrix& x) {
  Matrix z = x;
  const double n = static_cast<double>(x.rows());
  for (Index j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().sum() / n;
    if (var > 0.0) {
      z.col(j) = (x.col(j).array() - mean) / std::sqrt(var);
    } else {
      z.col(j).setZero();
    }
  }
  return z;
}

constexpr double kTieTolerance = 1e-9;

std::vector<std::vector<Index>> nearest_neighbors(const Matrix& points, int k) {
  const Index n = points.rows();
  const Index d = points.cols();
  if (k < 1 || n <= k) throw Error("nearest_neighbors: need n > k >= 1");

  // Exact search pruned by the projection on the leading principal axis:
  // |u . (a - b)| <= |a - b| for a unit u, so a scan outward in projection
  // order can stop once the gap exceeds the current k-th distance.
  Vector proj = Vector::Zero(n);
  if (d > 0) {
    const Matrix centered = points.rowwise() - points.colwise().mean();
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(centered.transpose() * centered);
    proj = centered * eig.eigenvectors().col(d - 1);
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return proj[a] < proj[b]; });
  const double slack = 1e-9 * (proj.cwiseAbs().maxCoeff() + 1.0);

  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = points;
  auto distance = [&](Index a, Index b) { return (rows.row(a) - rows.row(b)).squaredNorm(); };

  std::vector<std::vector<Index>> out(static_cast<std::size_t>(n));
  std::vector<std::pair<double, Index>> best;  // max-heap on (distance, index)
  for (std::size_t p = 0; p < order.size(); ++p) {
    const Index i = order[p];
    best.clear();
    auto offer = [&](Index j) {
      const std::pair<double, Index> c{distance(i, j), j};
      if (best.size() < static_cast<std::size_t>(k)) {
        best.push_back(c);
        std::push_heap(best.begin(), best.end());
      } else if (c < best.front()) {
        std::pop_heap(best.begin(), best.end());
        best.back() = c;
        std::push_heap(best.begin(), best.end());
      }
    };
    auto open = [&](std::size_t q) {
      if (best.size() < static_cast<std::size_t>(k)) return true;
      const double gap = std::abs(proj[order[q]] - proj[i]) - slack;
      return gap <= 0.0 || gap * gap <= best.front().first;
    };
    std::size_t lo = p, hi = p + 1;
    bool down = lo > 0, up = hi < order.size();
    while (down || up) {
      if (down && (!up || proj[i] - proj[order[lo - 1]] <= proj[order[hi]] - proj[i])) {
        if (open(lo - 1)) {
          offer(order[--lo]);
          down = lo > 0;
        } else {
          down = false;
        }
      } else {
        if (open(hi)) {
          offer(order[hi++]);
          up = hi < order.size();
        } else {
          up = false;
        }
      }
    }
    // Distances equal up to rounding count as ties and go to the lower
    // index, so gather everything within a relative 1e-9 of the k-th.
    const double limit = best.front().first * (1.0 + kTieTolerance) + std::numeric_limits<double>::min();
    best.clear();
    auto within = [&](std::size_t q) {
      const double gap = std::abs(proj[order[q]] - proj[i]) - slack;
      return gap <= 0.0 || gap * gap <= limit;
    };
    for (std::size_t q = p; q-- > 0 && within(q);)
      if (const double dq = distance(i, order[q]); dq <= limit) best.emplace_back(dq, order[q]);
    for (std::size_t q = p + 1; q < order.size() && within(q); ++q)
      if (const double dq = distance(i, order[q]); dq <= limit) best.emplace_back(dq, order[q]);
    std::sort(best.begin(), best.end());
    // Merge runs of near-equal distances, then order each run by index.
    for (std::size_t a = 0; a < best.size();) {
      std::size_t b = a + 1;
      while (b < best.size() && best[b].first <= best[b - 1].first * (1.0 + kTieTolerance) +
                                                     std::numeric_limits<double>::min())
        ++b;
      std::sort(best.begin() + a, best.begin() + b,
                [](const auto& l, const auto& r) { return l.second < r.second; });
      a = b;
    }
    auto& nb = out[static_cast<std::size_t>(i)];
    nb.reserve(k);
    for (int m = 0; m < k; ++m) nb.push_back(best[m].second);
  }
  return out;
}

double consistency(const Matrix& features, const Eigen::Ref<const IntVector>& labels, int k,
                   ConsistencyScaling scaling) {
  const Index n = features.rows();
  check_lengths(n, {labels.size()});
  if (k < 1 || n <= k) throw UndefinedMetric("consistency: need n > k >= 1");
  const auto neighbors = nearest_neighbors(
      scaling == ConsistencyScaling::ZScore ? standardize_columns(features) : features, k);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    double mean = 0.0;
    for (Index j : neighbors[static_cast<std::size_t>(i)]) mean += labels[j];
    mean /= k;
    total += std::abs(labels[i] - mean);
  }
  return 1.0 - total / static_cast<double>(n);
}

double consistency(const TabularDataset& ds, int k) {
  return consistency(ds.features, ds.labels, k, ds.consistency_scaling);
}

const char* to_string(Rate r) {
  switch (r) {
    case Rate::TPR: return "TPR";
    case Rate::FPR: return "FPR";
    case Rate::TNR: return "TNR";
    case Rate::FNR: return "FNR";
  }
  return "?";
}

double GroupConfusion::rate(Rate r, std::optional<Group> group) const {
  const ConfusionCounts& c = group ? groups[static_cast<int>(*group)] : overall;
  double num = 0.0;
  double den = 0.0;
  switch (r) {
    case Rate::TPR: num = c.tp; den = c.tp + c.fn; break;
    case Rate::FNR: num = c.fn; den = c.tp + c.fn; break;
    case Rate::FPR: num = c.fp; den = c.fp + c.tn; break;
    case Rate::TNR: num = c.tn; den = c.fp + c.tn; break;
  }
  if (!(den > 0.0))
    throw UndefinedMetric(std::string(to_string(r)) + " undefined for " +
                          (group ? std::string(group_name(*group)) + " group" : "pooled data"));
  return num / den;
}

GroupConfusion group_confusion(const Eigen::Ref<const IntVector>& y_true,
                               const Eigen::Ref<const IntVector>& y_pred,
                               const Eigen::Ref<const IntVector>& sensitive,
                               const Eigen::Ref<const Vector>& weights) {
  check_lengths(y_true.size(), {y_pred.size(), sensitive.size(), weights.size()});
  GroupConfusion c;
  for (Index i = 0; i < y_true.size(); ++i) {
    const double w = weights[i];
    for (ConfusionCounts* cc : {&c.groups[sensitive[i]], &c.overall}) {
      if (y_true[i] == 1) (y_pred[i] == 1 ? cc->tp : cc->fn) += w;
      else (y_pred[i] == 1 ? cc->fp : cc->tn) += w;
    }
  }
  return c;
}

double balanced_accuracy(const GroupConfusion& c) {
  return 0.5 * (c.rate(Rate::TPR) + c.rate(Rate::TNR));
}

double equal_opportunity_difference(const GroupConfusion& c) {
  return c.rate(Rate::TPR, Group::Unprivileged) - c.rate(Rate::TPR, Group::Privileged);
}

double average_odds_difference(const GroupConfusion& c) {
  return 0.5 * ((c.rate(Rate::FPR, Group::Unprivileged) - c.rate(Rate::FPR, Group::Privileged)) +
                (c.rate(Rate::TPR, Group::Unprivileged) - c.rate(Rate::TPR, Group::Privileged)));
}

void warn_degenerate_theil() {
  warn("theil index: all benefits are zero (every record a false negative); reporting 0");
}

DatasetMetrics dataset_metrics(const TabularDataset& ds, int k) {
  ds.validate();
  DatasetMetrics m;
  m.base_rate = base_rate(ds);
  capture(m.group_base_rates[0], m.issues, "base_rate[unprivileged]",
          [&] { return base_rate(ds, Group::Unprivileged); });
  capture(m.group_base_rates[1], m.issues, "base_rate[privileged]",
          [&] { return base_rate(ds, Group::Privileged); });
  capture(m.consistency, m.issues, "consistency", [&] { return consistency(ds, k); });
  capture(m.disparate_impact, m.issues, "disparate_impact", [&] { return disparate_impact(ds); });
  capture(m.statistical_parity_difference, m.issues, "statistical_parity_difference",
          [&] { return statistical_parity_difference(ds); });
  const auto counts = count_labels(ds);
  m.num_positives = counts.positives;
  m.num_negatives = counts.negatives;
  capture(m.empirical_difference, m.issues, "empirical_difference",
          [&] { return empirical_difference(ds); });
  return m;
}

IntVector threshold_scores(const Eigen::Ref<const Vector>& scores, double threshold) {
  return (scores.array() >= threshold).cast<int>();
}

ClassificationMetrics classification_metrics(const Eigen::Ref<const IntVector>& y_true,
                                             const Eigen::Ref<const Vector>& scores,
                                             double threshold,
                                             const Eigen::Ref<const IntVector>& sensitive,
                                             const Eigen::Ref<const Vector>& weights) {
  check_lengths(y_true.size(), {scores.size(), sensitive.size(), weights.size()});
  ClassificationMetrics m;
  m.threshold = threshold;
  const IntVector y_pred = threshold_scores(scores, threshold);
  const GroupConfusion conf = group_confusion(y_true, y_pred, sensitive, weights);
  auto& issues = m.issues;
  capture(m.balanced_accuracy, issues, "balanced_accuracy", [&] { return balanced_accuracy(conf); });
  capture(m.statistical_parity_difference, issues, "statistical_parity_difference",
          [&] { return rate_difference(y_pred, sensitive, weights); });
  capture(m.disparate_impact, issues, "disparate_impact",
          [&] { return rate_ratio(y_pred, sensitive, weights); });
  capture(m.equal_opportunity_difference, issues, "equal_opportunity_difference",
          [&] { return equal_opportunity_difference(conf); });
  capture(m.average_odds_difference, issues, "average_odds_difference",
          [&] { return average_odds_difference(conf); });
  capture(m.theil_index, issues, "theil_index", [&] { return theil_index(y_true, y_pred); });
  auto fill = [&](RateSet& rs, std::optional<Group> g, const std::string& tag) {
    capture(rs.tpr, issues, (tag + ".tpr").c_str(), [&] { return conf.rate(Rate::TPR, g); });
    capture(rs.fpr, issues, (tag + ".fpr").c_str(), [&] { return conf.rate(Rate::FPR, g); });
    capture(rs.tnr, issues, (tag + ".tnr").c_str(), [&] { return conf.rate(Rate::TNR, g); });
    capture(rs.fnr, issues, (tag + ".fnr").c_str(), [&] { return conf.rate(Rate::FNR, g); });
  };
  fill(m.group_rates[0], Group::Unprivileged, "unprivileged");
  fill(m.group_rates[1], Group::Privileged, "privileged");
  fill(m.overall_rates, std::nullopt, "overall");
  return m;
}

FairnessMetric parse_fairness_metric(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  if (s == "SPD" || s == "STATISTICAL_PARITY_DIFFERENCE") return FairnessMetric::SPD;
  if (s == "DI" || s == "DISPARATE_IMPACT") return FairnessMetric::DI;
  if (s == "EOD" || s == "EQUAL_OPPORTUNITY_DIFFERENCE") return FairnessMetric::EOD;
  if (s == "AOD" || s == "AVERAGE_ODDS_DIFFERENCE") return FairnessMetric::AOD;
  if (s == "THEIL" || s == "THEIL_INDEX") return FairnessMetric::Theil;
  throw Error("unknown fairness metric '" + std::string(name) + "' (expected SPD, DI, EOD, AOD or Theil)");
}

const char* to_string(FairnessMetric m) {
  switch (m) {
    case FairnessMetric::SPD: return "SPD";
    case FairnessMetric::DI: return "DI";
    case FairnessMetric::EOD: return "EOD";
    case FairnessMetric::AOD: return "AOD";
    case FairnessMetric::Theil: return "Theil";
  }
  return "?";
}

MetricValue metric_value(const ClassificationMetrics& m, FairnessMetric which) {
  switch (which) {
    case FairnessMetric::SPD: return m.statistical_parity_difference;
    case FairnessMetric::DI: return m.disparate_impact;
    case FairnessMetric::EOD: return m.equal_opportunity_difference;
    case FairnessMetric::AOD: return m.average_odds_difference;
    case FairnessMetric::Theil: return m.theil_index;
  }
  return std::nullopt;
}

}  // namespace fairbench
