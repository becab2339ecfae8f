#include "fairbench/pipeline.hpp"

#include "fairbench/model.hpp"
#include "fairbench/preproc.hpp"

#include <json.hpp>

#include <sstream>

namespace fairbench {
namespace {

LfrConfig lfr_config(const Params& p, std::uint64_t seed) {
  LfrConfig cfg;
  cfg.prototypes = static_cast<int>(p.get_int("k", cfg.prototypes));
  cfg.a_z = p.get_double("a_z", cfg.a_z);
  cfg.a_x = p.get_double("a_x", cfg.a_x);
  cfg.a_y = p.get_double("a_y", cfg.a_y);
  cfg.max_iter = static_cast<int>(p.get_int("max_iter", cfg.max_iter));
  cfg.tol = p.get_double("tol", cfg.tol);
  cfg.seed = seed;
  return cfg;
}

DirConfig dir_config(const Params& p) {
  DirConfig cfg;
  cfg.repair_level = p.get_double("repair_level", cfg.repair_level);
  cfg.grid_size = static_cast<int>(p.get_int("grid_size", cfg.grid_size));
  return cfg;
}

OppConfig opp_config(const Params& p, std::uint64_t seed) {
  OppConfig cfg;
  cfg.epsilon = p.get_double("epsilon", cfg.epsilon);
  cfg.distortion_budget = p.get_double("distortion", cfg.distortion_budget);
  cfg.bins = static_cast<int>(p.get_int("bins", cfg.bins));
  cfg.max_iter = static_cast<int>(p.get_int("max_iter", cfg.max_iter));
  cfg.columns = p.get_list("columns");
  cfg.label_flip_cost = p.get_double("flip_cost", cfg.label_flip_cost);
  cfg.seed = seed;
  return cfg;
}

std::string canonical_params(const Params& p) { return nlohmann::json(p.values()).dump(); }

std::string content_id(const TabularDataset& ds) {
  std::ostringstream out;
  write_fpds(out, ds);
  return sha256_hex(out.str());
}

// Held-out rows are evaluated against their observed labels, so only the
// features go through label-changing transforms.
TabularDataset with_features_of(const TabularDataset& base, const TabularDataset& transformed) {
  TabularDataset out = base;
  out.features = transformed.features;
  out.provenance = transformed.provenance;
  return out;
}

}  // namespace

Method parse_method(std::string_view name) {
  if (name == "RW") return Method::RW;
  if (name == "LFR") return Method::LFR;
  if (name == "DIR") return Method::DIR;
  if (name == "OPP") return Method::OPP;
  throw Error("unknown method '" + std::string(name) + "' (expected RW, LFR, DIR or OPP)");
}

const char* to_string(Method m) {
  switch (m) {
    case Method::RW: return "RW";
    case Method::LFR: return "LFR";
    case Method::DIR: return "DIR";
    case Method::OPP: return "OPP";
  }
  return "?";
}

void MethodSpec::validate() const {
  switch (method) {
    case Method::RW: params.require_known({}, "RW"); break;
    case Method::LFR: params.require_known({"k", "a_z", "a_x", "a_y", "max_iter", "tol"}, "LFR"); break;
    case Method::DIR: params.require_known({"repair_level", "grid_size"}, "DIR"); break;
    case Method::OPP:
      params.require_known({"epsilon", "distortion", "bins", "max_iter", "columns", "flip_cost"}, "OPP");
      break;
  }
}

TabularDataset apply_method(const MethodSpec& spec, const TabularDataset& ds, std::uint64_t seed) {
  spec.validate();
  switch (spec.method) {
    case Method::RW: return reweigh(ds).dataset;
    case Method::LFR: return lfr_transform(lfr_fit(ds, lfr_config(spec.params, seed)), ds);
    case Method::DIR: return dir_repair(ds, dir_config(spec.params));
    case Method::OPP: return opp_transform(opp_fit(ds, opp_config(spec.params, seed)), ds, seed);
  }
  throw Error("unreachable");
}

DatasetSplit apply_method_split(const MethodSpec& spec, const DatasetSplit& original, std::uint64_t seed) {
  spec.validate();
  DatasetSplit out = original;
  switch (spec.method) {
    case Method::RW:
      out.train = reweigh(original.train).dataset;
      break;
    case Method::LFR: {
      const LfrModel model = lfr_fit(original.train, lfr_config(spec.params, seed));
      out.train = lfr_transform(model, original.train);
      out.validation = lfr_transform(model, original.validation, false);
      out.test = lfr_transform(model, original.test, false);
      break;
    }
    case Method::DIR: {
      const DirModel model = dir_fit(original.train, dir_config(spec.params));
      out.train = dir_apply(model, original.train);
      out.validation = dir_apply(model, original.validation);
      out.test = dir_apply(model, original.test);
      break;
    }
    case Method::OPP: {
      const OppMap map = opp_fit(original.train, opp_config(spec.params, seed));
      out.train = opp_transform(map, original.train, seed);
      out.validation =
          with_features_of(original.validation, opp_transform(map, original.validation, seed + 1, false));
      out.test = with_features_of(original.test, opp_transform(map, original.test, seed + 2, false));
      break;
    }
  }
  return out;
}

TabularDataset load_dataset(const PrepRequest& req) {
  const SchemaFile file = load_schema(req.schema);
  if (!req.dataset.empty() && req.dataset != file.base.name)
    throw Error("schema '" + req.schema.string() + "' describes dataset '" + file.base.name + "', not '" +
                req.dataset + "'");
  const DatasetSchema schema = file.resolve(req.attribute);
  const std::filesystem::path data = req.data.empty() ? schema.data_path : req.data;
  if (data.empty()) throw Error("no data file given for dataset '" + schema.name + "'");
  return encode(load_csv(data, schema), schema);
}

StageOneReport run_prep_stage(const PrepRequest& req, const DatasetCache& cache) {
  const TabularDataset ds = load_dataset(req);
  const std::string attribute = req.attribute.empty() ? load_schema(req.schema).default_attribute : req.attribute;
  return run_prep_stage(ds, req.method, req.seed, cache, attribute, req.consistency_neighbors);
}

StageOneReport run_prep_stage(const TabularDataset& original, const MethodSpec& method, std::uint64_t seed,
                              const DatasetCache& cache, const std::string& attribute,
                              int consistency_neighbors) {
  method.validate();
  StageOneReport r;
  r.dataset = original.name;
  r.attribute = attribute;
  r.method = method;
  r.seed = seed;
  r.consistency_neighbors = consistency_neighbors;
  r.cache_root = cache.root();
  r.original = dataset_metrics(original, consistency_neighbors);

  const CacheKey orig_key{content_id(original)};
  r.original_cache_id = cache.contains(orig_key) ? orig_key.hex : cache.store(original, orig_key);

  const CacheKey key = CacheKey::make(r.original_cache_id, to_string(method.method),
                                      canonical_params(method.params), seed);
  std::optional<TabularDataset> processed = cache.load(key);
  if (!processed) {
    try {
      processed = apply_method(method, original, seed);
    } catch (const Error& e) {
      throw Error(original.name + " / " + to_string(method.method) + ": " + e.what());
    }
    cache.store(*processed, key);
  }
  r.processed_cache_id = key.hex;
  r.processed = dataset_metrics(*processed, consistency_neighbors);
  return r;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 99; ++k) grid.push_back(k / 100.0);
  return grid;
}

std::vector<SweepRecord> sweep_thresholds(const Eigen::Ref<const IntVector>& y_true,
                                          const Eigen::Ref<const Vector>& scores,
                                          const Eigen::Ref<const IntVector>& sensitive,
                                          const Eigen::Ref<const Vector>& weights,
                                          const std::vector<double>& grid) {
  std::vector<SweepRecord> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back({t, classification_metrics(y_true, scores, t, sensitive, weights)});
  return out;
}

std::optional<double> selection_score(const ClassificationMetrics& m, FairnessMetric metric) {
  const MetricValue v = metric_value(m, metric);
  if (!m.balanced_accuracy || !v) return std::nullopt;
  double deviation = 0.0;
  switch (metric) {
    case FairnessMetric::SPD:
    case FairnessMetric::EOD:
    case FairnessMetric::AOD: deviation = std::abs(*v); break;
    case FairnessMetric::DI: deviation = std::abs(1.0 - *v); break;
    case FairnessMetric::Theil: deviation = *v; break;
  }
  return *m.balanced_accuracy - deviation;
}

double select_optimal_threshold(const std::vector<SweepRecord>& records, FairnessMetric metric) {
  std::optional<double> best_t;
  double best = 0.0;
  for (const auto& r : records) {
    const auto s = selection_score(r.metrics, metric);
    if (!s) continue;
    if (!best_t || *s > best || (*s == best && r.threshold < *best_t)) {
      best = *s;
      best_t = r.threshold;
    }
  }
  if (!best_t) throw UndefinedMetric(std::string("no threshold has a defined ") + to_string(metric) + " score");
  return *best_t;
}

SweepResult evaluate_arm(const DatasetSplit& data, const BenchConfig& cfg) {
  auto model = make_classifier(cfg.model, cfg.model_params);
  model->fit(data.train);
  const auto eval_weights = [&](const TabularDataset& ds) -> Vector {
    return cfg.weighted_evaluation ? ds.weights : Vector::Ones(ds.size());
  };
  SweepResult r;
  r.selection_metric = cfg.selection_metric;
  const Vector val_scores = model->score(data.validation);
  const Vector test_scores = model->score(data.test);
  r.validation = sweep_thresholds(data.validation.labels, val_scores, data.validation.sensitive,
                                  eval_weights(data.validation));
  r.test = sweep_thresholds(data.test.labels, test_scores, data.test.sensitive, eval_weights(data.test));
  r.optimal_threshold = select_optimal_threshold(r.validation, cfg.selection_metric);
  for (std::size_t k = 0; k < r.validation.size(); ++k) {
    if (r.validation[k].threshold == r.optimal_threshold) {
      r.validation_at_optimal = r.validation[k].metrics;
      r.test_at_optimal = r.test[k].metrics;
    }
  }
  return r;
}

StageTwoReport run_bench_stage(const TabularDataset& original, const MethodSpec& method, std::uint64_t seed,
                               const BenchConfig& cfg) {
  method.validate();
  StageTwoReport report;
  report.dataset = original.name;
  report.method = to_string(method.method);
  report.model = cfg.model;
  const DatasetSplit base = split(original, cfg.split);
  report.split_fingerprint = base.indices.fingerprint();
  report.split_sizes = {base.train.size(), base.validation.size(), base.test.size()};

  const auto run_arm = [&](const std::string& name, auto&& make_data) {
    ArmResult arm;
    arm.arm = name;
    try {
      const DatasetSplit data = make_data();
      arm.train_size = data.train.size();
      arm.result = evaluate_arm(data, cfg);
    } catch (const std::exception& e) {
      arm.error = e.what();
    }
    return arm;
  };
  report.original = run_arm("original", [&] { return base; });
  report.processed = run_arm("processed", [&] { return apply_method_split(method, base, seed); });
  return report;
}

StageTwoReport run_bench_stage(const StageOneReport& stage1, const BenchConfig& cfg) {
  const DatasetCache cache(stage1.cache_root);
  const auto original = cache.load(CacheKey{stage1.original_cache_id});
  if (!original)
    throw Error("original dataset " + stage1.original_cache_id + " not found in cache " +
                stage1.cache_root.string());
  return run_bench_stage(*original, stage1.method, stage1.seed, cfg);
}

}  // namespace fairbench
