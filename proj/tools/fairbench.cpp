#include "fairbench/batch.hpp"
#include "fairbench/recipes.hpp"
#include "fairbench/report.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace fb = fairbench;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw fb::Error("cannot write '" + path.string() + "'");
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fb::DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct PrepareArgs {
  std::string recipe;
  std::vector<std::string> inputs;
  std::string output;
  bool list = false;
};

int run_prepare(const PrepareArgs& a) {
  if (a.list || a.recipe.empty()) {
    for (const auto& r : fb::recipes()) {
      std::cout << r.name << ":";
      for (const auto& f : r.inputs) std::cout << " " << f;
      std::cout << "\n";
    }
    return 0;
  }
  const std::vector<fs::path> inputs(a.inputs.begin(), a.inputs.end());
  const fs::path out = a.output.empty() ? fs::path(a.recipe + ".csv") : fs::path(a.output);
  const auto rows = fb::run_recipe(a.recipe, inputs, out);
  std::cout << "wrote " << rows << " rows to " << out.string() << "\n";
  return 0;
}

struct PrepArgs {
  std::string dataset;
  std::string schema;
  std::string attribute;
  std::string data;
  std::string method;
  std::vector<std::string> params;
  std::uint64_t seed = 0;
  int neighbors = fb::kDefaultConsistencyNeighbors;
  std::string cache = ".fairbench-cache";
  std::string out = ".";
};

int run_prep(const PrepArgs& a) {
  fb::PrepRequest req;
  req.dataset = a.dataset;
  req.schema = a.schema;
  req.attribute = a.attribute;
  req.data = a.data;
  req.method.method = fb::parse_method(a.method);
  req.method.params = fb::Params::from_assignments(a.params);
  req.method.validate();
  req.seed = a.seed;
  req.consistency_neighbors = a.neighbors;

  const fb::DatasetCache cache(fs::absolute(a.cache));
  const fb::StageOneReport report = fb::run_prep_stage(req, cache);

  std::ostringstream json;
  fb::write_json(json, fb::to_json(report));
  write_file(fs::path(a.out) / "stage1.json", json.str());
  std::ostringstream csv;
  fb::write_stage1_csv(csv, {report});
  write_file(fs::path(a.out) / "stage1.csv", csv.str());
  fb::write_metric_table_csv(std::cout, {report});
  return 0;
}

struct BenchArgs {
  std::string from;
  std::string model = "logreg";
  std::vector<std::string> params;
  std::string select_metric = "SPD";
  std::vector<double> split{0.70, 0.15, 0.15};
  bool weighted_evaluation = false;
  std::string out = ".";
};

int run_bench(const BenchArgs& a) {
  const fb::StageOneReport stage1 = fb::stage_one_from_json(nlohmann::json::parse(read_file(a.from)));
  fb::BenchConfig cfg;
  cfg.model = a.model;
  cfg.model_params = fb::Params::from_assignments(a.params);
  cfg.selection_metric = fb::parse_fairness_metric(a.select_metric);
  cfg.split = {a.split[0], a.split[1], a.split[2], stage1.seed};
  cfg.weighted_evaluation = a.weighted_evaluation;
  const fb::StageTwoReport stage2 = fb::run_bench_stage(stage1, cfg);

  const fs::path out(a.out);
  int status = 0;
  for (const fb::ArmResult* arm : {&stage2.original, &stage2.processed}) {
    if (!arm->ok()) {
      std::cerr << arm->arm << " arm failed: " << arm->error << "\n";
      status = 1;
      continue;
    }
    for (const auto& [name, records] :
         {std::pair{"validation", &arm->result->validation}, std::pair{"test", &arm->result->test}}) {
      std::ostringstream csv;
      fb::write_sweep_csv(csv, *records);
      write_file(out / ("sweep_" + arm->arm + "_" + name + ".csv"), csv.str());
    }
    write_file(out / ("sweep_" + arm->arm + ".svg"),
               fb::render_sweep_svg(*arm->result, stage1.dataset + " / " + fb::to_string(stage1.method.method) +
                                                      " / " + arm->arm + " arm"));
    const auto& t = arm->result->test_at_optimal;
    std::cout << arm->arm << ": threshold " << arm->result->optimal_threshold << ", balanced accuracy "
              << fb::format_fixed3(t.balanced_accuracy) << ", " << fb::to_string(cfg.selection_metric) << " "
              << fb::format_fixed3(fb::metric_value(t, cfg.selection_metric)) << "\n";
  }
  std::ostringstream summary;
  fb::write_json(summary, fb::summary_json(stage1, &stage2));
  write_file(out / "summary.json", summary.str());
  return status;
}

struct BatchArgs {
  std::string config;
  std::optional<int> parallelism;
  std::string out;
  std::string cache;
};

int run_batch(const BatchArgs& a) {
  const fb::BatchSpec spec = fb::load_batch_yaml(a.config);
  const fb::Expansion ex = fb::expand_jobs(spec);
  for (const auto& pair : ex.skipped_pairs) std::cerr << "skipped " << pair << ": attribute not in schema\n";

  fb::BatchOptions opts;
  opts.output = a.out.empty() ? spec.output : fs::path(a.out);
  opts.cache = a.cache.empty() ? spec.cache : fs::path(a.cache);
  opts.parallelism = a.parallelism.value_or(spec.parallelism);
  const fb::BatchReport report = fb::run_batch(ex.jobs, opts, ex.skipped);

  for (std::size_t i = 0; i < ex.jobs.size(); ++i) {
    const auto& o = report.jobs[i];
    std::cout << o.id << "  " << o.status << "  " << ex.jobs[i].dataset.name << "/" << ex.jobs[i].attribute << " "
              << fb::to_string(ex.jobs[i].method.method) << " seed " << ex.jobs[i].seed;
    if (!o.error.empty()) std::cout << "  (" << o.error << ")";
    std::cout << "\n";
  }
  std::cout << report.jobs.size() - report.failures() << " ok, " << report.failures() << " failed, "
            << report.skipped << " skipped; results in " << opts.output.string() << "\n";
  return report.failures() == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness pre-processing benchmark"};
  app.require_subcommand(1);

  PrepareArgs prepare;
  auto* cmd_prepare = app.add_subcommand("prepare", "Convert raw distribution files into a prepared CSV");
  cmd_prepare->add_option("recipe", prepare.recipe, "Recipe name (german, adult, compas, bank, meps)");
  cmd_prepare->add_option("--input,-i", prepare.inputs, "Raw input files, in the order the recipe lists them");
  cmd_prepare->add_option("--output,-o", prepare.output, "Prepared CSV path");
  cmd_prepare->add_flag("--list", prepare.list, "List recipes and their inputs");

  PrepArgs prep;
  auto* cmd_prep = app.add_subcommand("prep", "Stage 1: transform a dataset and compute data metrics");
  cmd_prep->add_option("--dataset", prep.dataset, "Dataset name (must match the schema)")->required();
  cmd_prep->add_option("--schema", prep.schema, "Schema YAML")->required()->check(CLI::ExistingFile);
  cmd_prep->add_option("--method", prep.method, "RW, LFR, DIR or OPP")->required();
  cmd_prep->add_option("--param", prep.params, "Method parameter key=value (repeatable)");
  cmd_prep->add_option("--seed", prep.seed, "Seed")->required();
  cmd_prep->add_option("--attribute", prep.attribute, "Sensitive attribute (default: schema default)");
  cmd_prep->add_option("--data", prep.data, "Prepared CSV (default: schema data path)");
  cmd_prep->add_option("--neighbors", prep.neighbors, "k for consistency")->check(CLI::PositiveNumber);
  cmd_prep->add_option("--cache", prep.cache, "Dataset cache directory")->capture_default_str();
  cmd_prep->add_option("--out", prep.out, "Directory for stage1.json and stage1.csv")->capture_default_str();

  BenchArgs bench;
  auto* cmd_bench = app.add_subcommand("bench", "Stage 2: train, sweep thresholds, select on validation");
  cmd_bench->add_option("--from", bench.from, "stage1.json written by prep")->required()->check(CLI::ExistingFile);
  cmd_bench->add_option("--model", bench.model, "Registered classifier")->capture_default_str();
  cmd_bench->add_option("--param", bench.params, "Model parameter key=value (repeatable)");
  cmd_bench->add_option("--select-metric", bench.select_metric, "SPD, DI, EOD, AOD or Theil")->capture_default_str();
  cmd_bench->add_option("--split", bench.split, "Train, validation and test fractions")->expected(3);
  cmd_bench->add_flag("--weighted-evaluation", bench.weighted_evaluation, "Use instance weights on held-out splits");
  cmd_bench->add_option("--out", bench.out, "Output directory")->capture_default_str();

  BatchArgs batch;
  auto* cmd_batch = app.add_subcommand("batch", "Run a YAML experiment matrix");
  cmd_batch->add_option("--config", batch.config, "Batch YAML")->required()->check(CLI::ExistingFile);
  cmd_batch->add_option("--parallelism", batch.parallelism, "Concurrent jobs")->check(CLI::PositiveNumber);
  cmd_batch->add_option("--out", batch.out, "Output directory (overrides the YAML)");
  cmd_batch->add_option("--cache", batch.cache, "Dataset cache directory (default: <out>/cache)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*cmd_prepare) return run_prepare(prepare);
    if (*cmd_prep) return run_prep(prep);
    if (*cmd_bench) return run_bench(bench);
    return run_batch(batch);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
