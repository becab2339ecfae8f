#pragma once

#include "fairbench/common.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace fairbench {

/// Untyped rows as read from a delimited text file. Every row has exactly one
/// cell per column.
struct RawTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t size() const { return rows.size(); }
  /// Position of `name` in `columns`, or -1.
  std::ptrdiff_t column_index(std::string_view name) const;
  /// Appends a column; `values` must have one entry per row.
  void add_column(std::string name, std::vector<std::string> values);
};

struct CsvOptions {
  char delimiter = ',';
  bool trim = false;
  /// Lines starting with this prefix are skipped (empty disables).
  std::string comment_prefix;
};

/// RFC-4180 reader. The first non-skipped record is the header.
RawTable read_csv(std::istream& in, const CsvOptions& opts = {});
/// Reads a headerless file, naming the columns from `columns`.
RawTable read_csv_headerless(std::istream& in, std::vector<std::string> columns,
                             const CsvOptions& opts = {});
void write_csv(std::ostream& out, const RawTable& table);

enum class CompareOp { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual, In };

/// Maps a raw cell to one of two output values by a predicate. Ordering
/// operators compare numerically; Equal/NotEqual/In compare numerically when
/// both sides parse as numbers and textually otherwise.
struct BinarizationRule {
  std::string column;
  CompareOp op = CompareOp::Equal;
  std::vector<std::string> operands;
  std::string if_true = "1";
  std::string if_false = "0";
  /// Name of the produced column; empty rewrites `column` in place.
  std::string output_column;

  bool test(std::string_view cell) const;
  const std::string& target() const { return output_column.empty() ? column : output_column; }
};

CompareOp parse_compare_op(std::string_view text);

enum class ConsistencyScaling { ZScore, None };

/// Everything needed to turn a RawTable into a TabularDataset for one
/// (dataset, sensitive attribute) pairing.
struct DatasetSchema {
  std::string name;
  std::string label_column;
  std::string favorable_value;
  std::string protected_column;
  std::set<std::string> privileged_values;
  std::vector<std::string> numeric_columns;
  std::vector<std::string> categorical_columns;
  std::vector<std::string> drop_columns;
  std::vector<BinarizationRule> binarization;
  /// Cells equal to one of these mark a value as missing; the row is dropped.
  std::vector<std::string> missing_markers;
  /// Keep the protected column as a model feature (off by default).
  bool protected_as_feature = false;
  ConsistencyScaling consistency_scaling = ConsistencyScaling::ZScore;
  /// Optional default location of the prepared CSV.
  std::filesystem::path data_path;

  void validate() const;
  /// Columns that must be present in the input table (after binarization
  /// outputs are accounted for).
  std::vector<std::string> referenced_columns() const;
};

/// A schema document: shared column description plus the sensitive-attribute
/// options it supports.
struct SchemaFile {
  struct ProtectedOption {
    std::string column;
    std::set<std::string> privileged_values;
  };

  DatasetSchema base;
  std::map<std::string, ProtectedOption> attributes;
  std::string default_attribute;

  bool has_attribute(const std::string& attr) const { return attributes.contains(attr); }
  /// Schema with the protected column chosen; empty `attr` selects the default.
  DatasetSchema resolve(const std::string& attr = {}) const;
};

SchemaFile parse_schema_yaml(std::string_view text);
SchemaFile load_schema(const std::filesystem::path& path);

enum class FeatureKind { Numeric, OneHot };

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  /// Raw column this feature came from.
  std::string source;
  /// Category level for one-hot columns.
  std::string level;

  friend bool operator==(const FeatureColumn&, const FeatureColumn&) = default;
};

/// Encoded dataset: features X, binary labels Y, binary protected attribute S
/// and per-instance weights.
struct TabularDataset {
  Matrix features;
  IntVector labels;
  IntVector sensitive;
  Vector weights;
  std::vector<FeatureColumn> columns;
  std::string name;
  std::string provenance;
  ConsistencyScaling consistency_scaling = ConsistencyScaling::ZScore;

  Index size() const { return labels.size(); }
  Index dims() const { return features.cols(); }
  /// Throws DataError if any invariant is violated.
  void validate() const;
  TabularDataset subset(std::span<const Index> rows) const;
  /// Indices of numeric (non one-hot) feature columns.
  std::vector<Index> numeric_feature_indices() const;

  friend bool operator==(const TabularDataset& a, const TabularDataset& b);
};

/// Append a lineage step to a provenance tag.
std::string extend_provenance(const std::string& provenance, const std::string& step);

/// Reads a CSV and checks it against the schema's referenced columns.
RawTable load_csv(const std::filesystem::path& path, const DatasetSchema& schema);

struct EncodeStats {
  std::size_t dropped_rows = 0;
  std::size_t unseen_categories = 0;
};

/// Categorical levels are learned by `fit` (first-seen order); `transform`
/// maps unseen levels to an all-zero one-hot block with a warning.
class Encoder {
 public:
  static Encoder fit(const RawTable& table, const DatasetSchema& schema);
  TabularDataset transform(const RawTable& table, EncodeStats* stats = nullptr) const;

  const DatasetSchema& schema() const { return schema_; }
  const std::map<std::string, std::vector<std::string>>& levels() const { return levels_; }

 private:
  DatasetSchema schema_;
  std::map<std::string, std::vector<std::string>> levels_;
};

TabularDataset encode(const RawTable& table, const DatasetSchema& schema,
                      EncodeStats* stats = nullptr);

/// Applies the schema's binarization rules, returning the rewritten table.
RawTable apply_binarization(const RawTable& table, std::span<const BinarizationRule> rules);

struct SplitSpec {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> validation;
  std::vector<Index> test;
  bool stratified_by_group = true;

  /// Hash of the three index lists; equal partitions have equal fingerprints.
  std::string fingerprint() const;
};

struct DatasetSplit {
  TabularDataset train;
  TabularDataset validation;
  TabularDataset test;
  SplitIndices indices;
};

/// Target sizes (train, validation, test); rounding remainder goes to train.
std::array<Index, 3> split_sizes(Index n, const SplitSpec& spec);
SplitIndices split_indices(const TabularDataset& ds, const SplitSpec& spec);
DatasetSplit split(const TabularDataset& ds, const SplitSpec& spec);

/// Two Gaussian features, balanced groups, group positive rates
/// 0.5 +/- disparity/2. The first feature tracks the label, the second the group.
TabularDataset make_synthetic(std::uint64_t seed, Index n, double disparity);

}  // namespace fairbench
