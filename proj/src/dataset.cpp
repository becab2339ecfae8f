#include "fairbench/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace fairbench {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool values_equal(std::string_view a, std::string_view b) {
  if (trim(a) == trim(b)) return true;
  auto x = parse_number(a);
  auto y = parse_number(b);
  return x && y && *x == *y;
}

bool in_set(std::string_view cell, const std::set<std::string>& values) {
  if (values.contains(std::string(trim(cell)))) return true;
  return std::any_of(values.begin(), values.end(),
                     [&](const std::string& v) { return values_equal(cell, v); });
}

// Splits `text` into records, honouring quotes. Returns (record, line number).
std::vector<std::pair<std::vector<std::string>, std::size_t>> parse_records(
    std::istream& in, const CsvOptions& opts) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::pair<std::vector<std::string>, std::size_t>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool was_quoted = false;
  bool line_has_content = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto finish_field = [&] {
    if (opts.trim && !was_quoted) field = std::string(trim(field));
    record.push_back(std::move(field));
    field.clear();
    was_quoted = false;
  };
  auto finish_record = [&] {
    finish_field();
    const bool blank = record.size() == 1 && record[0].empty() && !line_has_content;
    const bool comment = !opts.comment_prefix.empty() && !record.empty() &&
                         record[0].rfind(opts.comment_prefix, 0) == 0;
    if (!blank && !comment) records.emplace_back(std::move(record), record_line);
    record.clear();
    line_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && trim(field).empty()) {
      field.clear();
      in_quotes = true;
      was_quoted = true;
      line_has_content = true;
    } else if (c == opts.delimiter) {
      line_has_content = true;
      finish_field();
    } else if (c == '\n') {
      finish_record();
      ++line;
      record_line = line;
    } else if (c == '\r') {
      // tolerated before \n
    } else {
      field.push_back(c);
      line_has_content = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field starting near line " + std::to_string(record_line));
  if (!field.empty() || !record.empty() || line_has_content) finish_record();
  return records;
}

RawTable build_table(std::vector<std::string> columns,
                     std::vector<std::pair<std::vector<std::string>, std::size_t>> records,
                     std::size_t first) {
  RawTable table;
  table.columns = std::move(columns);
  table.rows.reserve(records.size() - std::min(first, records.size()));
  for (std::size_t r = first; r < records.size(); ++r) {
    auto& [cells, line] = records[r];
    if (cells.size() != table.columns.size()) {
      throw DataError("ragged row at line " + std::to_string(line) + ": expected " +
                      std::to_string(table.columns.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::ptrdiff_t RawTable::column_index(std::string_view name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : std::distance(columns.begin(), it);
}

void RawTable::add_column(std::string name, std::vector<std::string> values) {
  if (values.size() != rows.size())
    throw DataError("column '" + name + "' has " + std::to_string(values.size()) +
                    " values for " + std::to_string(rows.size()) + " rows");
  columns.push_back(std::move(name));
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r].push_back(std::move(values[r]));
}

RawTable read_csv(std::istream& in, const CsvOptions& opts) {
  auto records = parse_records(in, opts);
  if (records.empty()) throw DataError("empty CSV input: header row required");
  auto header = records.front().first;
  return build_table(std::move(header), std::move(records), 1);
}

RawTable read_csv_headerless(std::istream& in, std::vector<std::string> columns,
                             const CsvOptions& opts) {
  return build_table(std::move(columns), parse_records(in, opts), 0);
}

void write_csv(std::ostream& out, const RawTable& table) {
  auto write_row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << quote_csv(cells[i]);
    }
    out << '\n';
  };
  write_row(table.columns);
  for (const auto& row : table.rows) write_row(row);
}

CompareOp parse_compare_op(std::string_view text) {
  if (text == "<") return CompareOp::Less;
  if (text == "<=") return CompareOp::LessEqual;
  if (text == ">") return CompareOp::Greater;
  if (text == ">=") return CompareOp::GreaterEqual;
  if (text == "==" || text == "=") return CompareOp::Equal;
  if (text == "!=") return CompareOp::NotEqual;
  if (text == "in") return CompareOp::In;
  throw DataError("unknown comparison operator '" + std::string(text) + "'");
}

bool BinarizationRule::test(std::string_view cell) const {
  if (operands.empty()) throw DataError("binarization rule on '" + column + "' has no operand");
  switch (op) {
    case CompareOp::Equal:
      return values_equal(cell, operands.front());
    case CompareOp::NotEqual:
      return !values_equal(cell, operands.front());
    case CompareOp::In:
      return std::any_of(operands.begin(), operands.end(),
                         [&](const std::string& v) { return values_equal(cell, v); });
    default:
      break;
  }
  const auto x = parse_number(cell);
  if (!x)
    throw DataError("binarization rule on '" + column + "': non-numeric value '" +
                    std::string(cell) + "'");
  const auto y = parse_number(operands.front());
  if (!y) throw DataError("binarization rule on '" + column + "': non-numeric operand");
  switch (op) {
    case CompareOp::Less: return *x < *y;
    case CompareOp::LessEqual: return *x <= *y;
    case CompareOp::Greater: return *x > *y;
    case CompareOp::GreaterEqual: return *x >= *y;
    default: return false;
  }
}

RawTable apply_binarization(const RawTable& table, std::span<const BinarizationRule> rules) {
  RawTable out = table;
  for (const auto& rule : rules) {
    const auto src = out.column_index(rule.column);
    if (src < 0) throw DataError("binarization rule references missing column '" + rule.column + "'");
    std::vector<std::string> values;
    values.reserve(out.size());
    for (const auto& row : out.rows)
      values.push_back(rule.test(row[src]) ? rule.if_true : rule.if_false);
    if (rule.output_column.empty()) {
      for (std::size_t r = 0; r < out.size(); ++r) out.rows[r][src] = std::move(values[r]);
    } else {
      const auto dst = out.column_index(rule.output_column);
      if (dst >= 0) {
        for (std::size_t r = 0; r < out.size(); ++r) out.rows[r][dst] = std::move(values[r]);
      } else {
        out.add_column(rule.output_column, std::move(values));
      }
    }
  }
  return out;
}

std::vector<std::string> DatasetSchema::referenced_columns() const {
  std::vector<std::string> cols{label_column, protected_column};
  cols.insert(cols.end(), numeric_columns.begin(), numeric_columns.end());
  cols.insert(cols.end(), categorical_columns.begin(), categorical_columns.end());
  return cols;
}

void DatasetSchema::validate() const {
  if (name.empty()) throw DataError("schema: name is required");
  if (label_column.empty()) throw DataError("schema '" + name + "': label column is required");
  if (protected_column.empty())
    throw DataError("schema '" + name + "': protected column is required");
  if (label_column == protected_column)
    throw DataError("schema '" + name + "': label and protected column coincide");
  if (privileged_values.empty())
    throw DataError("schema '" + name + "': privileged values are required");
  std::set<std::string> seen;
  auto check = [&](const std::vector<std::string>& cols, const char* kind) {
    for (const auto& c : cols) {
      if (!seen.insert(c).second)
        throw DataError("schema '" + name + "': column '" + c + "' listed twice (" + kind + ")");
      if (c == label_column)
        throw DataError("schema '" + name + "': label column '" + c + "' listed as " + kind);
    }
  };
  check(numeric_columns, "numeric");
  check(categorical_columns, "categorical");
  check(drop_columns, "drop");
  std::size_t features = 0;
  for (const auto* cols : {&numeric_columns, &categorical_columns})
    for (const auto& c : *cols)
      if (c != protected_column || protected_as_feature) ++features;
  if (features == 0) throw DataError("schema '" + name + "': no feature columns remain");
}

DatasetSchema SchemaFile::resolve(const std::string& attr) const {
  const std::string key = attr.empty() ? default_attribute : attr;
  DatasetSchema schema = base;
  if (key.empty()) {
    schema.validate();
    return schema;
  }
  auto it = attributes.find(key);
  if (it == attributes.end())
    throw DataError("schema '" + base.name + "' has no sensitive attribute '" + key + "'");
  schema.protected_column = it->second.column;
  schema.privileged_values = it->second.privileged_values;
  auto strip = [&](std::vector<std::string>& cols) {
    if (schema.protected_as_feature) return;
    std::erase(cols, schema.protected_column);
  };
  strip(schema.numeric_columns);
  strip(schema.categorical_columns);
  schema.validate();
  return schema;
}

void TabularDataset::validate() const {
  const Index n = size();
  if (n < 1) throw DataError("dataset '" + name + "' is empty");
  if (features.rows() != n || sensitive.size() != n || weights.size() != n)
    throw DataError("dataset '" + name + "': inconsistent row counts");
  if (features.cols() < 1) throw DataError("dataset '" + name + "' has no features");
  if (static_cast<Index>(columns.size()) != features.cols())
    throw DataError("dataset '" + name + "': feature name count mismatch");
  for (Index i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("label outside {0,1} at row " + std::to_string(i));
    if (sensitive[i] != 0 && sensitive[i] != 1)
      throw DataError("protected value outside {0,1} at row " + std::to_string(i));
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw DataError("invalid weight at row " + std::to_string(i));
  }
  if (!(weights.sum() > 0.0)) throw DataError("dataset '" + name + "': weights sum to zero");
}

TabularDataset TabularDataset::subset(std::span<const Index> rows) const {
  TabularDataset out;
  const Index m = static_cast<Index>(rows.size());
  out.features.resize(m, features.cols());
  out.labels.resize(m);
  out.sensitive.resize(m);
  out.weights.resize(m);
  for (Index r = 0; r < m; ++r) {
    const Index src = rows[r];
    out.features.row(r) = features.row(src);
    out.labels[r] = labels[src];
    out.sensitive[r] = sensitive[src];
    out.weights[r] = weights[src];
  }
  out.columns = columns;
  out.name = name;
  out.provenance = provenance;
  out.consistency_scaling = consistency_scaling;
  return out;
}

std::vector<Index> TabularDataset::numeric_feature_indices() const {
  std::vector<Index> idx;
  for (Index j = 0; j < static_cast<Index>(columns.size()); ++j)
    if (columns[j].kind == FeatureKind::Numeric) idx.push_back(j);
  return idx;
}

bool operator==(const TabularDataset& a, const TabularDataset& b) {
  auto same_bits = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() &&
           std::memcmp(x.data(), y.data(), sizeof(*x.data()) * x.size()) == 0;
  };
  return a.name == b.name && a.provenance == b.provenance && a.columns == b.columns &&
         a.consistency_scaling == b.consistency_scaling && same_bits(a.features, b.features) &&
         same_bits(a.labels, b.labels) && same_bits(a.sensitive, b.sensitive) &&
         same_bits(a.weights, b.weights);
}

std::string extend_provenance(const std::string& provenance, const std::string& step) {
  return provenance.empty() ? step : provenance + "|" + step;
}

RawTable load_csv(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  RawTable table;
  try {
    table = read_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  std::set<std::string> produced;
  for (const auto& rule : schema.binarization)
    if (!rule.output_column.empty()) produced.insert(rule.output_column);
  for (const auto& rule : schema.binarization)
    if (table.column_index(rule.column) < 0 && !produced.contains(rule.column))
      throw DataError(path.string() + ": missing column '" + rule.column + "' (binarization rule)");
  for (const auto& col : schema.referenced_columns())
    if (table.column_index(col) < 0 && !produced.contains(col))
      throw DataError(path.string() + ": missing column '" + col + "'");
  return table;
}

namespace {

struct ResolvedColumns {
  std::ptrdiff_t label = -1;
  std::ptrdiff_t sensitive = -1;
  // Feature source columns in table order, with their kind.
  std::vector<std::pair<std::ptrdiff_t, FeatureKind>> features;
  std::vector<std::ptrdiff_t> referenced;
};

ResolvedColumns resolve_columns(const RawTable& table, const DatasetSchema& schema) {
  ResolvedColumns rc;
  auto require = [&](const std::string& col) {
    const auto idx = table.column_index(col);
    if (idx < 0) throw DataError("missing column '" + col + "'");
    return idx;
  };
  rc.label = require(schema.label_column);
  rc.sensitive = require(schema.protected_column);
  for (const auto& c : schema.numeric_columns) require(c);
  for (const auto& c : schema.categorical_columns) require(c);
  auto contains = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(table.columns.size()); ++j) {
    const auto& col = table.columns[j];
    if (contains(schema.drop_columns, col)) continue;
    if (col == schema.protected_column && !schema.protected_as_feature) continue;
    if (contains(schema.numeric_columns, col))
      rc.features.emplace_back(j, FeatureKind::Numeric);
    else if (contains(schema.categorical_columns, col))
      rc.features.emplace_back(j, FeatureKind::OneHot);
  }
  if (rc.features.empty()) throw DataError("schema '" + schema.name + "': no feature columns remain");
  rc.referenced = {rc.label, rc.sensitive};
  for (auto& [j, kind] : rc.features) rc.referenced.push_back(j);
  return rc;
}

bool is_missing(std::string_view cell, const DatasetSchema& schema) {
  const auto t = trim(cell);
  if (t.empty()) return true;
  return std::find(schema.missing_markers.begin(), schema.missing_markers.end(), t) !=
         schema.missing_markers.end();
}

std::vector<std::size_t> complete_rows(const RawTable& table, const ResolvedColumns& rc,
                                       const DatasetSchema& schema) {
  std::vector<std::size_t> keep;
  keep.reserve(table.size());
  for (std::size_t r = 0; r < table.size(); ++r) {
    const auto& row = table.rows[r];
    bool ok = std::none_of(rc.referenced.begin(), rc.referenced.end(),
                           [&](std::ptrdiff_t j) { return is_missing(row[j], schema); });
    if (ok) keep.push_back(r);
  }
  return keep;
}

}  // namespace

Encoder Encoder::fit(const RawTable& table, const DatasetSchema& schema) {
  schema.validate();
  Encoder enc;
  enc.schema_ = schema;
  const RawTable work = apply_binarization(table, schema.binarization);
  const auto rc = resolve_columns(work, schema);
  const auto keep = complete_rows(work, rc, schema);
  for (auto [j, kind] : rc.features) {
    if (kind != FeatureKind::OneHot) continue;
    auto& levels = enc.levels_[work.columns[j]];
    std::set<std::string> seen;
    for (auto r : keep) {
      std::string v(trim(work.rows[r][j]));
      if (seen.insert(v).second) levels.push_back(std::move(v));
    }
  }
  return enc;
}

TabularDataset Encoder::transform(const RawTable& table, EncodeStats* stats) const {
  const RawTable work = apply_binarization(table, schema_.binarization);
  const auto rc = resolve_columns(work, schema_);
  const auto keep = complete_rows(work, rc, schema_);
  const std::size_t dropped = work.size() - keep.size();
  if (dropped > 0)
    warn("dataset '" + schema_.name + "': dropped " + std::to_string(dropped) +
         " rows with missing values");

  TabularDataset ds;
  ds.name = schema_.name;
  ds.provenance = "raw:" + schema_.name + "/" + schema_.protected_column;
  ds.consistency_scaling = schema_.consistency_scaling;
  for (auto [j, kind] : rc.features) {
    const auto& col = work.columns[j];
    if (kind == FeatureKind::Numeric) {
      ds.columns.push_back({col, FeatureKind::Numeric, col, {}});
    } else {
      for (const auto& level : levels_.at(col))
        ds.columns.push_back({col + "=" + level, FeatureKind::OneHot, col, level});
    }
  }
  const Index n = static_cast<Index>(keep.size());
  const Index d = static_cast<Index>(ds.columns.size());
  if (n == 0) throw DataError("dataset '" + schema_.name + "': no complete rows");
  ds.features = Matrix::Zero(n, d);
  ds.labels.resize(n);
  ds.sensitive.resize(n);
  ds.weights = Vector::Ones(n);

  std::size_t unseen = 0;
  for (Index i = 0; i < n; ++i) {
    const auto& row = work.rows[keep[i]];
    ds.labels[i] = values_equal(row[rc.label], schema_.favorable_value) ? 1 : 0;
    ds.sensitive[i] = in_set(row[rc.sensitive], schema_.privileged_values) ? 1 : 0;
    Index out = 0;
    for (auto [j, kind] : rc.features) {
      const auto& col = work.columns[j];
      if (kind == FeatureKind::Numeric) {
        auto v = parse_number(row[j]);
        if (!v)
          throw DataError("non-numeric value '" + row[j] + "' in numeric column '" + col +
                          "' at data row " + std::to_string(keep[i] + 1));
        ds.features(i, out++) = *v;
      } else {
        const auto& levels = levels_.at(col);
        const auto cell = trim(row[j]);
        auto it = std::find(levels.begin(), levels.end(), cell);
        if (it == levels.end()) {
          ++unseen;
          warn("unseen category '" + std::string(cell) + "' in column '" + col +
               "' encoded as all-zero");
        } else {
          ds.features(i, out + std::distance(levels.begin(), it)) = 1.0;
        }
        out += static_cast<Index>(levels.size());
      }
    }
  }
  if (stats) {
    stats->dropped_rows = dropped;
    stats->unseen_categories = unseen;
  }
  ds.validate();
  return ds;
}

TabularDataset encode(const RawTable& table, const DatasetSchema& schema, EncodeStats* stats) {
  return Encoder::fit(table, schema).transform(table, stats);
}

void SplitSpec::validate() const {
  for (double f : {train, validation, test})
    if (!(f > 0.0 && f < 1.0)) throw DataError("split fractions must lie in (0,1)");
  if (std::abs(train + validation + test - 1.0) > 1e-9)
    throw DataError("split fractions must sum to 1 (got " +
                    std::to_string(train + validation + test) + ")");
}

std::array<Index, 3> split_sizes(Index n, const SplitSpec& spec) {
  spec.validate();
  const Index val = static_cast<Index>(std::llround(static_cast<double>(n) * spec.validation));
  const Index test = static_cast<Index>(std::llround(static_cast<double>(n) * spec.test));
  return {n - val - test, val, test};
}

std::string SplitIndices::fingerprint() const {
  std::ostringstream os;
  for (const auto* part : {&train, &validation, &test}) {
    for (Index i : *part) os << i << ',';
    os << ';';
  }
  return sha256_hex(os.str());
}

namespace {

// Rounds the stratum x split quota matrix so each entry is the floor or ceil
// of its quota while every row and column total is preserved. At most 4
// strata, so the 4^S candidate roundings of (validation, test) are enumerated.
std::vector<std::array<Index, 3>> round_allocation(const std::vector<Index>& strata_sizes,
                                                   const std::array<Index, 3>& totals, Index n) {
  const std::size_t S = strata_sizes.size();
  std::vector<std::array<double, 3>> quota(S);
  for (std::size_t c = 0; c < S; ++c)
    for (int s = 0; s < 3; ++s)
      quota[c][s] = static_cast<double>(strata_sizes[c]) * static_cast<double>(totals[s]) /
                    static_cast<double>(n);

  std::vector<std::array<Index, 3>> best;
  double best_cost = std::numeric_limits<double>::infinity();
  const std::size_t combos = std::size_t{1} << (2 * S);
  std::vector<std::array<Index, 3>> cand(S);
  for (std::size_t mask = 0; mask < combos; ++mask) {
    bool ok = true;
    std::array<Index, 3> col{0, 0, 0};
    double cost = 0.0;
    for (std::size_t c = 0; c < S && ok; ++c) {
      const Index va = static_cast<Index>(std::floor(quota[c][1])) + ((mask >> (2 * c)) & 1);
      const Index te = static_cast<Index>(std::floor(quota[c][2])) + ((mask >> (2 * c + 1)) & 1);
      const Index tr = strata_sizes[c] - va - te;
      const std::array<Index, 3> row{tr, va, te};
      for (int s = 0; s < 3; ++s) {
        const double dev = static_cast<double>(row[s]) - quota[c][s];
        if (row[s] < 0 || std::abs(dev) >= 1.0) ok = false;
        cost += dev * dev;
        col[s] += row[s];
      }
      cand[c] = row;
    }
    if (!ok || col != totals) continue;
    if (cost < best_cost - 1e-12) {
      best_cost = cost;
      best = cand;
    }
  }
  if (best.empty()) throw Error("split: no consistent stratified allocation found");
  return best;
}

}  // namespace

SplitIndices split_indices(const TabularDataset& ds, const SplitSpec& spec) {
  const Index n = ds.size();
  if (n < 10) throw DataError("split: need at least 10 rows, got " + std::to_string(n));
  std::array<Index, 4> cell_counts{0, 0, 0, 0};
  for (Index i = 0; i < n; ++i) ++cell_counts[ds.labels[i] * 2 + ds.sensitive[i]];
  if (cell_counts[0] + cell_counts[1] == 0 || cell_counts[2] + cell_counts[3] == 0)
    throw DataError("split: both labels must be present");
  if (cell_counts[0] + cell_counts[2] == 0 || cell_counts[1] + cell_counts[3] == 0)
    throw DataError("split: both groups must be present");

  SplitIndices out;
  out.stratified_by_group = std::all_of(cell_counts.begin(), cell_counts.end(),
                                        [](Index c) { return c > 0; });
  if (!out.stratified_by_group)
    warn("split: a (label, group) cell is empty; stratifying on label only");

  const int strata = out.stratified_by_group ? 4 : 2;
  std::vector<std::vector<Index>> members(strata);
  for (Index i = 0; i < n; ++i) {
    const int key = out.stratified_by_group ? ds.labels[i] * 2 + ds.sensitive[i] : ds.labels[i];
    members[key].push_back(i);
  }
  std::mt19937_64 rng(spec.seed);
  for (auto& m : members) std::shuffle(m.begin(), m.end(), rng);

  std::vector<Index> sizes;
  for (const auto& m : members) sizes.push_back(static_cast<Index>(m.size()));
  const auto alloc = round_allocation(sizes, split_sizes(n, spec), n);
  for (int c = 0; c < strata; ++c) {
    const auto& m = members[c];
    const Index va = alloc[c][1];
    const Index te = alloc[c][2];
    out.validation.insert(out.validation.end(), m.begin(), m.begin() + va);
    out.test.insert(out.test.end(), m.begin() + va, m.begin() + va + te);
    out.train.insert(out.train.end(), m.begin() + va + te, m.end());
  }
  for (auto* part : {&out.train, &out.validation, &out.test}) std::sort(part->begin(), part->end());
  return out;
}

DatasetSplit split(const TabularDataset& ds, const SplitSpec& spec) {
  DatasetSplit out;
  out.indices = split_indices(ds, spec);
  out.train = ds.subset(out.indices.train);
  out.validation = ds.subset(out.indices.validation);
  out.test = ds.subset(out.indices.test);
  return out;
}

TabularDataset make_synthetic(std::uint64_t seed, Index n, double disparity) {
  if (n < 8) throw DataError("make_synthetic: n must be at least 8");
  if (!(disparity >= 0.0 && disparity <= 1.0))
    throw DataError("make_synthetic: disparity must lie in [0,1]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  TabularDataset ds;
  ds.name = "synthetic";
  ds.provenance = "synthetic:seed=" + std::to_string(seed) + ",n=" + std::to_string(n) +
                  ",disparity=" + std::to_string(disparity);
  ds.sensitive = IntVector::Zero(n);
  ds.sensitive.head(n / 2).setOnes();
  std::shuffle(ds.sensitive.data(), ds.sensitive.data() + n, rng);
  ds.labels.resize(n);
  ds.features.resize(n, 2);
  ds.weights = Vector::Ones(n);
  for (Index i = 0; i < n; ++i) {
    const double rate = ds.sensitive[i] == 1 ? 0.5 + disparity / 2 : 0.5 - disparity / 2;
    ds.labels[i] = unif(rng) < rate ? 1 : 0;
    ds.features(i, 0) = (2.0 * ds.labels[i] - 1.0) + noise(rng);
    ds.features(i, 1) = (2.0 * ds.sensitive[i] - 1.0) + noise(rng);
  }
  ds.columns = {{"x1", FeatureKind::Numeric, "x1", {}}, {"x2", FeatureKind::Numeric, "x2", {}}};
  return ds;
}

}  // namespace fairbench
