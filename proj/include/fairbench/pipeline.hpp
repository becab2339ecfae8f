#pragma once

#include "fairbench/cache.hpp"
#include "fairbench/dataset.hpp"
#include "fairbench/metrics.hpp"
#include "fairbench/params.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fairbench {

enum class Method { RW, LFR, DIR, OPP };
Method parse_method(std::string_view name);
const char* to_string(Method m);

/// A pre-processing method with its hyperparameters.
struct MethodSpec {
  Method method = Method::RW;
  Params params;

  /// Throws Error on parameters the method does not accept.
  void validate() const;
  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

/// Applies the method to a whole dataset (fit and transform on the same rows).
TabularDataset apply_method(const MethodSpec& spec, const TabularDataset& ds, std::uint64_t seed);

/// Train/validation/test views of the processed arm: the transform is fit on
/// the training rows only and then applied to the held-out rows, which keep
/// their original labels and weights.
DatasetSplit apply_method_split(const MethodSpec& spec, const DatasetSplit& original, std::uint64_t seed);

struct StageOneReport {
  std::string dataset;
  std::string attribute;
  MethodSpec method;
  std::uint64_t seed = 0;
  int consistency_neighbors = kDefaultConsistencyNeighbors;
  DatasetMetrics original;
  DatasetMetrics processed;
  std::string original_cache_id;
  std::string processed_cache_id;
  std::filesystem::path cache_root;
};

struct PrepRequest {
  std::string dataset;
  std::filesystem::path schema;
  /// Sensitive attribute; empty selects the schema default.
  std::string attribute;
  /// Prepared CSV; empty uses the schema's data path.
  std::filesystem::path data;
  MethodSpec method;
  std::uint64_t seed = 0;
  int consistency_neighbors = kDefaultConsistencyNeighbors;
};

/// Loads and encodes a dataset as described by a prep request.
TabularDataset load_dataset(const PrepRequest& req);

StageOneReport run_prep_stage(const PrepRequest& req, const DatasetCache& cache);
/// Same, for an already encoded dataset.
StageOneReport run_prep_stage(const TabularDataset& original, const MethodSpec& method, std::uint64_t seed,
                              const DatasetCache& cache, const std::string& attribute = {},
                              int consistency_neighbors = kDefaultConsistencyNeighbors);

struct SweepRecord {
  double threshold = 0.0;
  ClassificationMetrics metrics;
  friend bool operator==(const SweepRecord&, const SweepRecord&) = default;
};

/// 0.01, 0.02, ..., 0.99.
std::vector<double> default_threshold_grid();

std::vector<SweepRecord> sweep_thresholds(const Eigen::Ref<const IntVector>& y_true,
                                          const Eigen::Ref<const Vector>& scores,
                                          const Eigen::Ref<const IntVector>& sensitive,
                                          const Eigen::Ref<const Vector>& weights,
                                          const std::vector<double>& grid = default_threshold_grid());

/// Balanced accuracy minus the metric's deviation from parity; empty when a
/// constituent is undefined.
std::optional<double> selection_score(const ClassificationMetrics& m, FairnessMetric metric);

/// Grid point maximizing the selection score; ties go to the lower threshold.
/// Throws UndefinedMetric when no record has a defined score.
double select_optimal_threshold(const std::vector<SweepRecord>& records, FairnessMetric metric);

struct SweepResult {
  std::vector<SweepRecord> validation;
  std::vector<SweepRecord> test;
  double optimal_threshold = 0.5;
  FairnessMetric selection_metric = FairnessMetric::SPD;
  ClassificationMetrics validation_at_optimal;
  ClassificationMetrics test_at_optimal;

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

struct ArmResult {
  std::string arm;  // "original" or "processed"
  std::optional<SweepResult> result;
  std::string error;
  Index train_size = 0;

  bool ok() const { return result.has_value(); }
};

struct BenchConfig {
  std::string model = "logreg";
  Params model_params;
  SplitSpec split;
  FairnessMetric selection_metric = FairnessMetric::SPD;
  /// Evaluate held-out metrics with instance weights instead of unit weights.
  bool weighted_evaluation = false;
};

struct StageTwoReport {
  std::string dataset;
  std::string method;
  std::string model;
  ArmResult original;
  ArmResult processed;
  std::string split_fingerprint;
  std::array<Index, 3> split_sizes{};
};

/// Trains one model, sweeps validation and test, and selects the threshold.
SweepResult evaluate_arm(const DatasetSplit& data, const BenchConfig& cfg);

StageTwoReport run_bench_stage(const TabularDataset& original, const MethodSpec& method,
                               std::uint64_t seed, const BenchConfig& cfg);
/// Reloads the original dataset from the cache named in the report.
StageTwoReport run_bench_stage(const StageOneReport& stage1, const BenchConfig& cfg);

}  // namespace fairbench
