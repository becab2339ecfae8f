#include "fairbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>
#include <sstream>

namespace fairbench {

using nlohmann::json;

namespace {

json optional_json(const MetricValue& v) { return v ? json(*v) : json(nullptr); }

MetricValue optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_metric_row(std::ostream& out, const std::string& dataset, const std::string& method,
                      const DatasetMetrics& m) {
  out << csv_cell(dataset) << ',' << csv_cell(method) << ',' << format_fixed3(m.base_rate) << ','
      << format_fixed3(m.consistency) << ',' << format_fixed3(m.disparate_impact) << ','
      << format_fixed3(m.statistical_parity_difference) << ',' << m.num_positives << ','
      << m.num_negatives << ',' << format_fixed3(m.empirical_difference) << '\n';
}

void write_header(std::ostream& out, const std::vector<std::string>& header) {
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
}

json rates_json(const RateSet& r) {
  return {{"tpr", optional_json(r.tpr)}, {"fpr", optional_json(r.fpr)},
          {"tnr", optional_json(r.tnr)}, {"fnr", optional_json(r.fnr)}};
}

RateSet rates_from(const json& j) {
  return {optional_from(j.at("tpr")), optional_from(j.at("fpr")), optional_from(j.at("tnr")),
          optional_from(j.at("fnr"))};
}

json arm_json(const ArmResult& arm) {
  json j = {{"arm", arm.arm}, {"train_size", arm.train_size}};
  if (arm.ok()) {
    j["status"] = "ok";
    j["result"] = to_json(*arm.result);
  } else {
    j["status"] = "failed";
    j["error"] = arm.error;
  }
  return j;
}

}  // namespace

const std::vector<std::string>& metric_table_header() {
  static const std::vector<std::string> header{
      "dataset",           "method",        "base_rate",     "consistency",         "disparate_impact",
      "statistical_parity", "num_positives", "num_negatives", "empirical_difference"};
  return header;
}

std::string format_fixed3(const MetricValue& v) {
  if (!v || !std::isfinite(*v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", *v);
  // Avoid "-0.000" so rounding to zero prints one way.
  if (std::string_view(buf) == "-0.000") return "0.000";
  return buf;
}

void write_stage1_csv(std::ostream& out, const std::vector<StageOneReport>& reports) {
  if (reports.empty()) throw Error("stage-1 table needs at least one report");
  write_header(out, metric_table_header());
  for (const auto& r : reports) write_metric_row(out, r.dataset, to_string(r.method.method), r.processed);
}

void write_metric_table_csv(std::ostream& out, const std::vector<StageOneReport>& reports) {
  if (reports.empty()) throw Error("metric table needs at least one report");
  write_header(out, metric_table_header());
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : reports) {
    if (seen.insert({r.dataset, r.attribute}).second) write_metric_row(out, r.dataset, "Orig.", r.original);
    write_metric_row(out, r.dataset, to_string(r.method.method), r.processed);
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& records) {
  write_header(out, {"threshold", "balanced_accuracy", "statistical_parity_difference", "disparate_impact",
                     "equal_opportunity_difference", "average_odds_difference", "theil_index"});
  for (const auto& r : records) {
    char t[16];
    std::snprintf(t, sizeof t, "%.2f", r.threshold);
    const auto& m = r.metrics;
    out << t << ',' << format_fixed3(m.balanced_accuracy) << ','
        << format_fixed3(m.statistical_parity_difference) << ',' << format_fixed3(m.disparate_impact) << ','
        << format_fixed3(m.equal_opportunity_difference) << ',' << format_fixed3(m.average_odds_difference)
        << ',' << format_fixed3(m.theil_index) << '\n';
  }
}

json to_json(const DatasetMetrics& m) {
  return {{"base_rate", m.base_rate},
          {"group_base_rates",
           {{"unprivileged", optional_json(m.group_base_rates[0])},
            {"privileged", optional_json(m.group_base_rates[1])}}},
          {"consistency", optional_json(m.consistency)},
          {"disparate_impact", optional_json(m.disparate_impact)},
          {"statistical_parity_difference", optional_json(m.statistical_parity_difference)},
          {"num_positives", m.num_positives},
          {"num_negatives", m.num_negatives},
          {"empirical_difference", optional_json(m.empirical_difference)},
          {"issues", m.issues}};
}

DatasetMetrics dataset_metrics_from_json(const json& j) {
  DatasetMetrics m;
  m.base_rate = j.at("base_rate").get<double>();
  m.group_base_rates = {optional_from(j.at("group_base_rates").at("unprivileged")),
                        optional_from(j.at("group_base_rates").at("privileged"))};
  m.consistency = optional_from(j.at("consistency"));
  m.disparate_impact = optional_from(j.at("disparate_impact"));
  m.statistical_parity_difference = optional_from(j.at("statistical_parity_difference"));
  m.num_positives = j.at("num_positives").get<Index>();
  m.num_negatives = j.at("num_negatives").get<Index>();
  m.empirical_difference = optional_from(j.at("empirical_difference"));
  m.issues = j.at("issues").get<std::vector<std::string>>();
  return m;
}

json to_json(const ClassificationMetrics& m) {
  return {{"threshold", m.threshold},
          {"balanced_accuracy", optional_json(m.balanced_accuracy)},
          {"statistical_parity_difference", optional_json(m.statistical_parity_difference)},
          {"disparate_impact", optional_json(m.disparate_impact)},
          {"equal_opportunity_difference", optional_json(m.equal_opportunity_difference)},
          {"average_odds_difference", optional_json(m.average_odds_difference)},
          {"theil_index", optional_json(m.theil_index)},
          {"group_rates", {{"unprivileged", rates_json(m.group_rates[0])},
                           {"privileged", rates_json(m.group_rates[1])}}},
          {"overall_rates", rates_json(m.overall_rates)},
          {"issues", m.issues}};
}

ClassificationMetrics classification_metrics_from_json(const json& j) {
  ClassificationMetrics m;
  m.threshold = j.at("threshold").get<double>();
  m.balanced_accuracy = optional_from(j.at("balanced_accuracy"));
  m.statistical_parity_difference = optional_from(j.at("statistical_parity_difference"));
  m.disparate_impact = optional_from(j.at("disparate_impact"));
  m.equal_opportunity_difference = optional_from(j.at("equal_opportunity_difference"));
  m.average_odds_difference = optional_from(j.at("average_odds_difference"));
  m.theil_index = optional_from(j.at("theil_index"));
  m.group_rates = {rates_from(j.at("group_rates").at("unprivileged")),
                   rates_from(j.at("group_rates").at("privileged"))};
  m.overall_rates = rates_from(j.at("overall_rates"));
  m.issues = j.at("issues").get<std::vector<std::string>>();
  return m;
}

json to_json(const SweepResult& r) {
  json val = json::array(), test = json::array();
  for (const auto& rec : r.validation) val.push_back(to_json(rec.metrics));
  for (const auto& rec : r.test) test.push_back(to_json(rec.metrics));
  return {{"selection_metric", to_string(r.selection_metric)},
          {"optimal_threshold", r.optimal_threshold},
          {"validation_at_optimal", to_json(r.validation_at_optimal)},
          {"test_at_optimal", to_json(r.test_at_optimal)},
          {"validation", std::move(val)},
          {"test", std::move(test)}};
}

json to_json(const StageOneReport& r) {
  return {{"schema", kStageOneSchema},
          {"dataset", r.dataset},
          {"attribute", r.attribute},
          {"method", {{"name", to_string(r.method.method)}, {"params", r.method.params.values()}}},
          {"seed", r.seed},
          {"consistency_neighbors", r.consistency_neighbors},
          {"original", to_json(r.original)},
          {"processed", to_json(r.processed)},
          {"original_cache_id", r.original_cache_id},
          {"processed_cache_id", r.processed_cache_id},
          {"cache_root", r.cache_root.string()}};
}

StageOneReport stage_one_from_json(const json& j) {
  if (j.value("schema", "") != kStageOneSchema)
    throw DataError(std::string("not a stage-1 report (expected schema ") + kStageOneSchema + ")");
  StageOneReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.attribute = j.at("attribute").get<std::string>();
  r.method.method = parse_method(j.at("method").at("name").get<std::string>());
  r.method.params = Params(j.at("method").at("params").get<std::map<std::string, std::string>>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.consistency_neighbors = j.at("consistency_neighbors").get<int>();
  r.original = dataset_metrics_from_json(j.at("original"));
  r.processed = dataset_metrics_from_json(j.at("processed"));
  r.original_cache_id = j.at("original_cache_id").get<std::string>();
  r.processed_cache_id = j.at("processed_cache_id").get<std::string>();
  r.cache_root = j.at("cache_root").get<std::string>();
  return r;
}

json to_json(const StageTwoReport& r) {
  return {{"dataset", r.dataset},
          {"method", r.method},
          {"model", r.model},
          {"split_fingerprint", r.split_fingerprint},
          {"split_sizes", {{"train", r.split_sizes[0]}, {"validation", r.split_sizes[1]}, {"test", r.split_sizes[2]}}},
          {"arms", {arm_json(r.original), arm_json(r.processed)}}};
}

json summary_json(const StageOneReport& stage1, const StageTwoReport* stage2, const json& job) {
  json s1 = to_json(stage1);
  // Cache location is machine-specific; the summary stays comparable across runs.
  s1.erase("cache_root");
  json j = {{"schema", kSummarySchema}, {"job", job}, {"stage1", std::move(s1)}};
  j["stage2"] = stage2 ? to_json(*stage2) : json(nullptr);
  return j;
}

void write_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

// ---------------------------------------------------------------------------
// SVG

namespace {

constexpr double kPanelW = 300.0, kPanelH = 260.0;
constexpr double kLeft = 50.0, kRight = 50.0, kTop = 50.0, kBottom = 45.0;
constexpr double kTitleH = 40.0;
constexpr double kXMin = 0.01, kXMax = 0.99;
const char* const kBlue = "#1f5fbf";
const char* const kRed = "#c8102e";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::pair<double, double> value_range(const std::vector<MetricValue>& values) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& v : values)
    if (v && std::isfinite(*v)) {
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (hi - lo < 1e-9) {
    const double pad = std::max(std::abs(lo) * 0.1, 0.5);
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

// Polyline segments through the defined points; undefined values split the line.
void write_series(std::ostringstream& svg, const std::vector<double>& xs, const std::vector<MetricValue>& ys,
                  double x0, double y0, double w, double h, double lo, double hi, const char* color) {
  std::vector<std::string> segment;
  auto flush = [&] {
    if (segment.empty()) return;
    if (segment.size() == 1) {
      const auto comma = segment[0].find(',');
      svg << "<circle cx=\"" << segment[0].substr(0, comma) << "\" cy=\"" << segment[0].substr(comma + 1)
          << "\" r=\"1.5\" fill=\"" << color << "\"/>\n";
    } else {
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < segment.size(); ++i) svg << (i ? " " : "") << segment[i];
      svg << "\"/>\n";
    }
    segment.clear();
  };
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!ys[i] || !std::isfinite(*ys[i])) {
      flush();
      continue;
    }
    const double px = x0 + (xs[i] - kXMin) / (kXMax - kXMin) * w;
    const double py = y0 + h - (*ys[i] - lo) / (hi - lo) * h;
    segment.push_back(num(px) + "," + num(py));
  }
  flush();
}

}  // namespace

std::string render_sweep_svg(const SweepResult& result, const std::string& arm_label, const std::string& split) {
  const auto& records = split == "validation" ? result.validation : result.test;
  const FairnessMetric panels[] = {FairnessMetric::SPD, FairnessMetric::DI, FairnessMetric::EOD,
                                   FairnessMetric::AOD, FairnessMetric::Theil};
  const double width = 5 * kPanelW;
  const double height = kTitleH + kPanelH;
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"10\" y=\"18\" font-size=\"14\">" << escape_xml(arm_label) << " (" << escape_xml(split)
      << " split, threshold " << num(kXMin) << "-" << num(kXMax) << ")</text>\n";
  // Legend
  svg << "<line x1=\"10\" y1=\"30\" x2=\"30\" y2=\"30\" stroke=\"" << kBlue << "\" stroke-width=\"2\"/>"
      << "<text x=\"34\" y=\"34\">Balanced accuracy (left axis)</text>\n";
  svg << "<line x1=\"220\" y1=\"30\" x2=\"240\" y2=\"30\" stroke=\"" << kRed << "\" stroke-width=\"2\"/>"
      << "<text x=\"244\" y=\"34\">Fairness metric (right axis)</text>\n";
  svg << "<line x1=\"430\" y1=\"30\" x2=\"450\" y2=\"30\" stroke=\"black\" stroke-dasharray=\"4,3\"/>"
      << "<text x=\"454\" y=\"34\">Selected threshold " << num(result.optimal_threshold) << "</text>\n";

  std::vector<double> xs;
  std::vector<MetricValue> ba;
  for (const auto& r : records) {
    xs.push_back(r.threshold);
    ba.push_back(r.metrics.balanced_accuracy);
  }

  for (int p = 0; p < 5; ++p) {
    const FairnessMetric metric = panels[p];
    std::vector<MetricValue> ys;
    for (const auto& r : records) ys.push_back(metric_value(r.metrics, metric));
    const auto [lo, hi] = value_range(ys);
    const double x0 = p * kPanelW + kLeft;
    const double y0 = kTitleH + kTop;
    const double w = kPanelW - kLeft - kRight;
    const double h = kPanelH - kTop - kBottom;

    svg << "<g class=\"panel\" data-metric=\"" << to_string(metric) << "\">\n";
    svg << "<text x=\"" << num(x0 + w / 2) << "\" y=\"" << num(y0 - 18) << "\" text-anchor=\"middle\">"
        << to_string(metric) << "</text>\n";
    svg << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" fill=\"none\" stroke=\"#888\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double frac = k / 4.0;
      const double py = y0 + h - frac * h;
      svg << "<text x=\"" << num(x0 - 4) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\" fill=\"" << kBlue
          << "\">" << num(frac) << "</text>\n";
      svg << "<text x=\"" << num(x0 + w + 4) << "\" y=\"" << num(py + 4) << "\" fill=\"" << kRed << "\">"
          << num(lo + frac * (hi - lo)) << "</text>\n";
      const double tx = kXMin + frac * (kXMax - kXMin);
      const double px = x0 + frac * w;
      svg << "<text x=\"" << num(px) << "\" y=\"" << num(y0 + h + 14) << "\" text-anchor=\"middle\">" << num(tx)
          << "</text>\n";
    }
    svg << "<text x=\"" << num(x0 + w / 2) << "\" y=\"" << num(y0 + h + 30)
        << "\" text-anchor=\"middle\">threshold</text>\n";
    write_series(svg, xs, ba, x0, y0, w, h, 0.0, 1.0, kBlue);
    write_series(svg, xs, ys, x0, y0, w, h, lo, hi, kRed);
    const double mx = x0 + (result.optimal_threshold - kXMin) / (kXMax - kXMin) * w;
    svg << "<line class=\"optimal\" x1=\"" << num(mx) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(mx)
        << "\" y2=\"" << num(y0 + h) << "\" stroke=\"black\" stroke-dasharray=\"4,3\"/>\n";
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace fairbench
