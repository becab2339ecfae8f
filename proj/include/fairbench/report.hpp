#pragma once

#include "fairbench/pipeline.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace fairbench {

inline constexpr const char* kSummarySchema = "fairbench.summary/1";
inline constexpr const char* kStageOneSchema = "fairbench.stage1/1";

/// Table-1 style header: dataset, method, metrics (1)-(7) with counts split.
const std::vector<std::string>& metric_table_header();

/// One row per report, holding the processed-side metrics.
void write_stage1_csv(std::ostream& out, const std::vector<StageOneReport>& reports);

/// Like write_stage1_csv, but each distinct (dataset, attribute) pair also
/// gets a leading "Orig." row with the original-side metrics.
void write_metric_table_csv(std::ostream& out, const std::vector<StageOneReport>& reports);

/// One row per threshold.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& records);

/// Three decimals; "NA" for undefined values.
std::string format_fixed3(const MetricValue& v);

nlohmann::json to_json(const DatasetMetrics& m);
nlohmann::json to_json(const ClassificationMetrics& m);
nlohmann::json to_json(const SweepResult& r);
nlohmann::json to_json(const StageOneReport& r);
nlohmann::json to_json(const StageTwoReport& r);

DatasetMetrics dataset_metrics_from_json(const nlohmann::json& j);
ClassificationMetrics classification_metrics_from_json(const nlohmann::json& j);
StageOneReport stage_one_from_json(const nlohmann::json& j);

/// Versioned summary document for one job. `stage2` may be null when only
/// stage 1 ran.
nlohmann::json summary_json(const StageOneReport& stage1, const StageTwoReport* stage2,
                            const nlohmann::json& job = nlohmann::json::object());
void write_json(std::ostream& out, const nlohmann::json& j);

/// Five side-by-side panels (SPD, DI, EOD, AOD, Theil), balanced accuracy on
/// the left axis and the metric on the right axis, with the selected
/// threshold marked. `split` picks the plotted records ("test" or "validation").
std::string render_sweep_svg(const SweepResult& result, const std::string& arm_label,
                             const std::string& split = "test");

}  // namespace fairbench
