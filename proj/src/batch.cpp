#include "fairbench/batch.hpp"

#include "fairbench/report.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

namespace fairbench {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw DataError("batch config: " + path + ": " + message);
}

void check_keys(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) fail(path, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

std::string scalar(const YAML::Node& node, const std::string& path) {
  if (!node.IsScalar()) fail(path, "expected a scalar");
  return node.as<std::string>();
}

template <typename T>
T number(const YAML::Node& node, const std::string& path) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(path, "expected a number, got '" + (node.IsScalar() ? node.as<std::string>() : "non-scalar") + "'");
  }
}

std::vector<YAML::Node> sequence(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence() || node.size() == 0) fail(path, "expected a non-empty list");
  return {node.begin(), node.end()};
}

Params params_of(const YAML::Node& node, const std::string& path) {
  Params p;
  if (!node) return p;
  if (!node.IsMap()) fail(path, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (kv.second.IsSequence()) {
      std::string joined;
      for (const auto& item : kv.second) joined += (joined.empty() ? "" : ",") + scalar(item, path + "." + key);
      p.set(key, joined);
    } else {
      p.set(key, scalar(kv.second, path + "." + key));
    }
  }
  return p;
}

// Entries are either a bare name or {name, params}.
std::pair<std::string, Params> named_entry(const YAML::Node& node, const std::string& path) {
  if (node.IsScalar()) return {node.as<std::string>(), {}};
  check_keys(node, path, {"name", "params"});
  if (!node["name"]) fail(path, "missing 'name'");
  return {scalar(node["name"], path + ".name"), params_of(node["params"], path + ".params")};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.empty() || p.is_absolute() || base.empty() ? p : base / p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

BatchSpec parse_batch_yaml(std::string_view text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw DataError(std::string("batch config: ") + e.what());
  }
  check_keys(root, "", {"datasets", "sensitive_attributes", "methods", "models", "seeds", "split",
                        "selection_metric", "output", "parallelism", "cache", "schema_dir"});
  for (const char* required : {"datasets", "methods", "models", "seeds"})
    if (!root[required]) fail(required, "required key missing");

  BatchSpec spec;
  const std::filesystem::path schema_dir =
      root["schema_dir"] ? resolve(base_dir, scalar(root["schema_dir"], "schema_dir")) : base_dir;

  const auto datasets = sequence(root["datasets"], "datasets");
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const std::string path = "datasets[" + std::to_string(i) + "]";
    DatasetRef ref;
    if (datasets[i].IsScalar()) {
      ref.name = datasets[i].as<std::string>();
      ref.schema = schema_dir / (ref.name + ".yaml");
    } else {
      check_keys(datasets[i], path, {"name", "schema", "data"});
      if (!datasets[i]["name"]) fail(path, "missing 'name'");
      ref.name = scalar(datasets[i]["name"], path + ".name");
      ref.schema = datasets[i]["schema"] ? resolve(base_dir, scalar(datasets[i]["schema"], path + ".schema"))
                                         : schema_dir / (ref.name + ".yaml");
      if (datasets[i]["data"]) ref.data = resolve(base_dir, scalar(datasets[i]["data"], path + ".data"));
    }
    spec.datasets.push_back(std::move(ref));
  }

  if (const auto attrs = root["sensitive_attributes"]) {
    if (attrs.IsMap()) {
      for (const auto& kv : attrs) {
        const auto name = kv.first.as<std::string>();
        for (const auto& a : sequence(kv.second, "sensitive_attributes." + name))
          spec.sensitive_by_dataset[name].push_back(scalar(a, "sensitive_attributes." + name));
      }
    } else {
      for (const auto& a : sequence(attrs, "sensitive_attributes"))
        spec.sensitive_attributes.push_back(scalar(a, "sensitive_attributes"));
    }
  }

  const auto methods = sequence(root["methods"], "methods");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const std::string path = "methods[" + std::to_string(i) + "]";
    auto [name, params] = named_entry(methods[i], path);
    MethodSpec m;
    try {
      m.method = parse_method(name);
      m.params = std::move(params);
      m.validate();
    } catch (const Error& e) {
      fail(path, e.what());
    }
    spec.methods.push_back(std::move(m));
  }

  const auto models = sequence(root["models"], "models");
  for (std::size_t i = 0; i < models.size(); ++i) {
    auto [name, params] = named_entry(models[i], "models[" + std::to_string(i) + "]");
    spec.models.push_back({std::move(name), std::move(params)});
  }

  for (const auto& s : sequence(root["seeds"], "seeds")) spec.seeds.push_back(number<std::uint64_t>(s, "seeds"));

  if (const auto split = root["split"]) {
    check_keys(split, "split", {"train", "validation", "test"});
    const auto get = [&](const char* k) { return split[k] ? number<double>(split[k], std::string("split.") + k) : 0.0; };
    spec.split.train = get("train");
    spec.split.validation = get("validation");
    spec.split.test = get("test");
    const double sum = spec.split.train + spec.split.validation + spec.split.test;
    if (std::abs(sum - 1.0) > 1e-9) fail("split", "fractions must sum to 1 (got " + std::to_string(sum) + ")");
    try {
      spec.split.validate();
    } catch (const Error& e) {
      fail("split", e.what());
    }
  }

  if (const auto m = root["selection_metric"]) {
    try {
      spec.selection_metric = parse_fairness_metric(scalar(m, "selection_metric"));
    } catch (const Error& e) {
      fail("selection_metric", e.what());
    }
  }
  if (const auto o = root["output"]) spec.output = resolve(base_dir, scalar(o, "output"));
  else spec.output = resolve(base_dir, spec.output);
  if (const auto c = root["cache"]) spec.cache = resolve(base_dir, scalar(c, "cache"));
  if (const auto p = root["parallelism"]) {
    spec.parallelism = number<int>(p, "parallelism");
    if (spec.parallelism < 1) fail("parallelism", "must be at least 1");
  }
  return spec;
}

BatchSpec load_batch_yaml(const std::filesystem::path& path) {
  return parse_batch_yaml(read_file(path), path.parent_path());
}

std::string JobSpec::canonical() const {
  const json j = {{"dataset", dataset.name},
                  {"attribute", attribute},
                  {"method", {{"name", to_string(method.method)}, {"params", method.params.values()}}},
                  {"model", {{"name", model.name}, {"params", model.params.values()}}},
                  {"seed", seed},
                  {"split", {split.train, split.validation, split.test}},
                  {"selection_metric", to_string(selection_metric)}};
  return j.dump();
}

std::string JobSpec::id() const { return sha256_hex(canonical()).substr(0, 16); }

std::uint64_t JobSpec::job_seed() const { return hash64(std::to_string(seed) + ":" + id()); }

Expansion expand_jobs(const BatchSpec& spec) {
  Expansion ex;
  for (const auto& ds : spec.datasets) {
    const SchemaFile schema = load_schema(ds.schema);
    std::vector<std::string> attrs;
    if (!spec.sensitive_by_dataset.empty()) {
      const auto it = spec.sensitive_by_dataset.find(ds.name);
      if (it != spec.sensitive_by_dataset.end()) attrs = it->second;
    } else {
      attrs = spec.sensitive_attributes;
    }
    if (attrs.empty()) attrs.push_back(schema.default_attribute);
    for (const auto& attr : attrs) {
      if (!attr.empty() && !schema.has_attribute(attr)) {
        ++ex.skipped;
        ex.skipped_pairs.push_back(ds.name + "/" + attr);
        continue;
      }
      for (const auto& method : spec.methods)
        for (const auto& model : spec.models)
          for (const auto seed : spec.seeds)
            ex.jobs.push_back({ds, attr, method, model, seed, spec.split, spec.selection_metric});
    }
  }
  if (ex.jobs.empty()) throw Error("batch expands to no jobs");
  std::vector<std::pair<std::string, std::size_t>> order;
  for (std::size_t i = 0; i < ex.jobs.size(); ++i) order.emplace_back(ex.jobs[i].canonical(), i);
  std::sort(order.begin(), order.end());
  for (std::size_t i = 1; i < order.size(); ++i)
    if (order[i].first == order[i - 1].first) throw Error("batch contains duplicate job " + order[i].first);
  std::vector<JobSpec> sorted;
  for (const auto& [c, i] : order) sorted.push_back(ex.jobs[i]);
  ex.jobs = std::move(sorted);
  return ex;
}

std::size_t BatchReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(jobs.begin(), jobs.end(), [](const JobOutcome& j) { return j.status != "ok"; }));
}

JobOutcome run_job(const JobSpec& job, const BatchOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  JobOutcome outcome;
  outcome.id = job.id();
  try {
    const auto dir = opts.output / outcome.id;
    std::filesystem::create_directories(dir);
    const std::uint64_t seed = job.job_seed();

    PrepRequest req;
    req.dataset = job.dataset.name;
    req.schema = job.dataset.schema;
    req.attribute = job.attribute;
    req.data = job.dataset.data;
    req.method = job.method;
    req.seed = seed;
    const TabularDataset ds = load_dataset(req);

    const DatasetCache cache(opts.cache.empty() ? opts.output / "cache" : opts.cache);
    StageOneReport stage1 = run_prep_stage(ds, job.method, seed, cache, job.attribute);
    outcome.stage1 = stage1;
    {
      std::ostringstream csv;
      write_stage1_csv(csv, {stage1});
      write_text(dir / "stage1.csv", csv.str());
      outcome.artifacts.push_back(std::filesystem::path(outcome.id) / "stage1.csv");
    }

    BenchConfig cfg;
    cfg.model = job.model.name;
    cfg.model_params = job.model.params;
    cfg.split = job.split;
    cfg.split.seed = seed;
    cfg.selection_metric = job.selection_metric;
    const StageTwoReport stage2 = run_bench_stage(ds, job.method, seed, cfg);

    std::vector<std::string> errors;
    for (const ArmResult* arm : {&stage2.original, &stage2.processed}) {
      if (!arm->ok()) {
        errors.push_back(arm->arm + " arm: " + arm->error);
        continue;
      }
      for (const auto& [split_name, records] :
           {std::pair{"validation", &arm->result->validation}, std::pair{"test", &arm->result->test}}) {
        std::ostringstream csv;
        write_sweep_csv(csv, *records);
        const std::string file = "sweep_" + arm->arm + "_" + split_name + ".csv";
        write_text(dir / file, csv.str());
        outcome.artifacts.push_back(std::filesystem::path(outcome.id) / file);
      }
      const std::string svg_file = "sweep_" + arm->arm + ".svg";
      write_text(dir / svg_file,
                 render_sweep_svg(*arm->result, job.dataset.name + " / " + to_string(job.method.method) + " / " +
                                                    arm->arm + " arm"));
      outcome.artifacts.push_back(std::filesystem::path(outcome.id) / svg_file);
    }

    const json job_json = {{"id", outcome.id},
                           {"spec", json::parse(job.canonical())},
                           {"job_seed", seed}};
    std::ostringstream summary;
    write_json(summary, summary_json(stage1, &stage2, job_json));
    write_text(dir / "summary.json", summary.str());
    outcome.artifacts.push_back(std::filesystem::path(outcome.id) / "summary.json");

    if (errors.empty()) {
      outcome.status = "ok";
    } else {
      outcome.status = "failed";
      for (const auto& e : errors) outcome.error += (outcome.error.empty() ? "" : "; ") + e;
    }
  } catch (const std::exception& e) {
    outcome.status = "failed";
    outcome.error = e.what();
  }
  outcome.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return outcome;
}

BatchReport run_batch(const std::vector<JobSpec>& jobs, const BatchOptions& opts, std::size_t skipped) {
  if (opts.parallelism < 1) throw Error("parallelism must be at least 1");
  std::filesystem::create_directories(opts.output);
  BatchReport report;
  report.skipped = skipped;
  report.jobs.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) report.jobs[i] = run_job(jobs[i], opts);
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(opts.parallelism), jobs.size());
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }

  json entries = json::array();
  std::vector<StageOneReport> stage1;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& o = report.jobs[i];
    json artifacts = json::array();
    for (const auto& a : o.artifacts) artifacts.push_back(a.generic_string());
    entries.push_back({{"id", o.id},
                       {"spec", json::parse(jobs[i].canonical())},
                       {"status", o.status},
                       {"error", o.error},
                       {"wall_seconds", o.wall_seconds},
                       {"artifacts", std::move(artifacts)}});
    if (o.stage1) stage1.push_back(*o.stage1);
  }
  std::ostringstream out;
  write_json(out, {{"schema", "fairbench.batch/1"},
                   {"jobs", std::move(entries)},
                   {"skipped", skipped},
                   {"failures", report.failures()}});
  write_text(opts.output / "batch_report.json", out.str());
  if (!stage1.empty()) {
    std::ostringstream csv;
    write_metric_table_csv(csv, stage1);
    write_text(opts.output / "metric_table.csv", csv.str());
  }
  return report;
}

}  // namespace fairbench
