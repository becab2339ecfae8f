#pragma once

#include "fairbench/pipeline.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fairbench {

struct DatasetRef {
  std::string name;
  std::filesystem::path schema;
  /// Empty uses the schema's data path.
  std::filesystem::path data;
};

struct ModelSpec {
  std::string name = "logreg";
  Params params;
};

struct BatchSpec {
  std::vector<DatasetRef> datasets;
  /// Attributes tried for every dataset ...
  std::vector<std::string> sensitive_attributes;
  /// ... or, when non-empty, per dataset name.
  std::map<std::string, std::vector<std::string>> sensitive_by_dataset;
  std::vector<MethodSpec> methods;
  std::vector<ModelSpec> models;
  std::vector<std::uint64_t> seeds;
  SplitSpec split;
  FairnessMetric selection_metric = FairnessMetric::SPD;
  std::filesystem::path output = "results";
  std::filesystem::path cache;  // empty: <output>/cache
  int parallelism = 1;
};

/// Relative schema/data/output/cache paths are resolved against `base_dir`.
BatchSpec parse_batch_yaml(std::string_view text, const std::filesystem::path& base_dir = {});
BatchSpec load_batch_yaml(const std::filesystem::path& path);

struct JobSpec {
  DatasetRef dataset;
  std::string attribute;
  MethodSpec method;
  ModelSpec model;
  std::uint64_t seed = 0;
  SplitSpec split;
  FairnessMetric selection_metric = FairnessMetric::SPD;

  /// Canonical JSON of the tuple; the id is a prefix of its SHA-256.
  std::string canonical() const;
  std::string id() const;
  /// Seed used by every random step of the job, derived from (seed, id).
  std::uint64_t job_seed() const;
};

struct Expansion {
  std::vector<JobSpec> jobs;
  /// (dataset, attribute) pairs dropped because the schema lacks the attribute.
  std::size_t skipped = 0;
  std::vector<std::string> skipped_pairs;
};

/// Cartesian product in canonical order. Throws Error if nothing remains.
Expansion expand_jobs(const BatchSpec& spec);

struct JobOutcome {
  std::string id;
  std::string status;  // "ok" or "failed"
  std::string error;
  double wall_seconds = 0.0;
  std::vector<std::filesystem::path> artifacts;
  /// Present once stage 1 finished.
  std::optional<StageOneReport> stage1;
};

struct BatchOptions {
  std::filesystem::path output;
  std::filesystem::path cache;
  int parallelism = 1;
};

struct BatchReport {
  std::vector<JobOutcome> jobs;  // same order as the input
  std::size_t skipped = 0;

  std::size_t failures() const;
};

/// Runs one job end to end and writes its artifacts under
/// `<output>/<job id>/`.
JobOutcome run_job(const JobSpec& job, const BatchOptions& opts);

/// Runs jobs on a pool of `parallelism` threads and writes the batch-level
/// files (batch_report.json, metric_table.csv) into the output directory.
BatchReport run_batch(const std::vector<JobSpec>& jobs, const BatchOptions& opts, std::size_t skipped = 0);

}  // namespace fairbench
