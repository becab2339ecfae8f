#pragma once

#include "fairbench/dataset.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fairbench {

// ---------------------------------------------------------------------------
// Reweighing

struct ReweighResult {
  TabularDataset dataset;
  /// W(s, y), indexed [s][y].
  std::array<std::array<double, 2>, 2> cell_weights{};
};

/// Multiplies each weight by Pr(S=s) Pr(Y=y) / Pr(S=s, Y=y), with the
/// probabilities taken under the input weights. Throws DataError if a
/// (group, label) cell is empty.
ReweighResult reweigh(const TabularDataset& ds);

// ---------------------------------------------------------------------------
// Learned fair representations

struct LfrConfig {
  int prototypes = 10;
  double a_z = 50.0;  // statistical parity of prototype memberships
  double a_x = 0.01;  // reconstruction
  double a_y = 1.0;   // label prediction
  std::uint64_t seed = 0;
  int max_iter = 5000;
  double tol = 1e-6;
};

/// Prototype locations (K x d, standardized units) and their label weights.
struct LfrParams {
  Matrix prototypes;
  Vector label_weights;
};

struct LfrLoss {
  double total = 0.0;
  double fairness = 0.0;
  double reconstruction = 0.0;
  double prediction = 0.0;
};

/// Objective of a prototype configuration on standardized features. When
/// `grad` is non-null it receives dL/dV and dL/dw (w's gradient is the raw
/// derivative, not projected).
LfrLoss lfr_objective(const LfrParams& params, const Matrix& x, const Eigen::Ref<const IntVector>& y,
                      const Eigen::Ref<const IntVector>& s, const LfrConfig& cfg,
                      LfrParams* grad = nullptr);

/// Row-wise softmax of negative squared distances to the prototypes.
Matrix lfr_memberships(const Matrix& prototypes, const Matrix& x);

struct LfrModel {
  LfrParams params;
  /// Standardization applied before the prototypes (fit-data statistics).
  Vector mean;
  Vector scale;
  LfrConfig config;
  std::vector<double> trace;
  int iterations = 0;
};

LfrModel lfr_fit(const TabularDataset& ds, const LfrConfig& cfg);

/// Features become the membership-weighted prototype mix (mapped back to the
/// input units). Labels become [y_hat >= 0.5] unless `replace_labels` is off.
TabularDataset lfr_transform(const LfrModel& model, const TabularDataset& ds,
                             bool replace_labels = true);

// ---------------------------------------------------------------------------
// Disparate impact remover

struct DirConfig {
  double repair_level = 1.0;
  int grid_size = 100;
};

/// Per numeric column: each group's empirical CDF and the median-of-groups
/// quantile function sampled on a shared grid.
struct DirModel {
  struct Column {
    Index column = 0;
    bool passthrough = false;
    /// Sorted distinct values per group. A value occupying sorted positions
    /// a..b has CDF interval [lo, hi] = [a, b] / (n_s - 1); tied records are
    /// spread over that interval in index order.
    std::array<std::vector<double>, 2> values;
    std::array<std::vector<double>, 2> cdf_lo;
    std::array<std::vector<double>, 2> cdf_hi;
    /// Repaired quantile function on the grid u_m = m / (grid_size - 1).
    std::vector<double> target;
  };
  DirConfig config;
  std::vector<Column> columns;
};

DirModel dir_fit(const TabularDataset& ds, const DirConfig& cfg);
TabularDataset dir_apply(const DirModel& model, const TabularDataset& ds);
/// Fit and apply on the same data.
TabularDataset dir_repair(const TabularDataset& ds, const DirConfig& cfg);

// ---------------------------------------------------------------------------
// Optimized pre-processing

struct OppConfig {
  double epsilon = 0.05;            // allowed relative deviation from the target rate
  double distortion_budget = 0.25;  // expected distortion allowed per (x, y, s) cell
  int bins = 8;
  std::uint64_t seed = 0;
  int max_iter = 500;               // per penalty stage
  /// Raw column names to transform; empty selects every feature column.
  std::vector<std::string> columns;
  double label_flip_cost = 1.0;
  double penalty_start = 1.0;
  double penalty_max = 1e5;
  double penalty_growth = 10.0;
  /// Called with the transition table after every accepted iteration.
  std::function<void(const Matrix&)> on_iterate;
};

/// A discretized attribute: binned numeric column or one-hot block.
struct OppAttribute {
  std::string source;
  FeatureKind kind = FeatureKind::Numeric;
  /// Feature-matrix columns (one for numeric, the block for one-hot).
  std::vector<Index> feature_columns;
  /// Numeric: bin edges e_0 < ... < e_B and the training median of each bin.
  std::vector<double> edges;
  std::vector<double> bin_medians;

  int cardinality() const;
};

struct OppMap {
  std::vector<OppAttribute> attributes;
  Index domain_size = 1;  // number of discretized feature combinations
  /// Source cells (x * 2 + y) * 2 + s with training mass, ascending.
  std::vector<Index> source_cells;
  /// Row per source cell; column per target cell x_hat * 2 + y_hat.
  Matrix transition;
  /// P(y = 1 | x, s), indexed x * 2 + s; NaN where unobserved.
  Vector label_given_xs;
  std::array<double, 2> group_label_rate{};
  /// Normalized training mass of each source cell.
  Vector source_mass;
  /// Smoothed training distribution over (x, y) target cells.
  Vector reference;
  std::array<double, 2> group_mass{};
  double target_rate = 0.0;
  double epsilon = 0.0;
  double distortion_budget = 0.0;
  double label_flip_cost = 1.0;
  /// Objective per accepted iteration; a new stage starts at each index in
  /// `stage_starts`.
  std::vector<double> trace;
  std::vector<std::size_t> stage_starts;
  double fairness_residual = 0.0;
  double distortion_residual = 0.0;

  /// Discretized feature index of one record (clamps out-of-range values).
  Index encode_features(const Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>& row, bool* clamped = nullptr) const;
  /// Conditional target distribution for a source cell (identity if unseen).
  Vector row_for(Index x, int y, int s) const;
  double distortion(Index x, int y, Index x_hat, int y_hat) const;
};

OppMap opp_fit(const TabularDataset& ds, const OppConfig& cfg);

/// Resamples binned features and labels from the fitted conditionals. With
/// `transform_labels` off, labels are kept and features are drawn from the
/// mixture over labels given by P(y | x, s).
TabularDataset opp_transform(const OppMap& map, const TabularDataset& ds, std::uint64_t seed,
                             bool transform_labels = true);

/// Features replaced by bin medians / nearest level, with no resampling.
TabularDataset opp_discretize(const OppMap& map, const TabularDataset& ds);

/// Objective pieces at a given transition table (exposed for oracles).
struct OppObjective {
  double kl = 0.0;
  double fairness = 0.0;
  double distortion = 0.0;
  std::array<double, 2> group_rates{};
  /// kl + rho * (fairness + distortion)
  double penalized(double rho) const { return kl + rho * (fairness + distortion); }
};
OppObjective opp_evaluate(const OppMap& map, const Matrix& transition);

}  // namespace fairbench
