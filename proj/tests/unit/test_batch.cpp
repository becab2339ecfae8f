#include "fairbench/batch.hpp"

#include "oracles.hpp"

#include <json.hpp>

#include <map>
#include <set>

#include <doctest.h>

using namespace fairbench;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = FAIRBENCH_FIXTURE_DIR;

std::string two_by_two(const fs::path& out) {
  return "datasets: [toy]\n"
         "sensitive_attributes: [group, region]\n"
         "methods: [RW, {name: DIR, params: {repair_level: 0.5}}]\n"
         "models: [logreg]\n"
         "seeds: [1]\n"
         "output: " + out.string() + "\n";
}

/// Every regular file under `root` except the timing-bearing batch report,
/// keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).generic_string();
    if (rel == "batch_report.json" || rel.starts_with("cache/")) continue;
    files[rel] = oracle::read_file(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("a minimal config takes the defaults") {
  const auto spec = parse_batch_yaml("datasets: [toy]\nmethods: [RW]\nmodels: [logreg]\nseeds: [0]\n", kFixtures);
  CHECK(spec.datasets.at(0).schema == kFixtures / "toy.yaml");
  CHECK(spec.split.train == 0.70);
  CHECK(spec.selection_metric == FairnessMetric::SPD);
  CHECK(spec.parallelism == 1);
  CHECK(spec.output == kFixtures / "results");
  const auto ex = expand_jobs(spec);
  REQUIRE(ex.jobs.size() == 1);
  CHECK(ex.jobs[0].attribute == "group");
}

TEST_CASE("config errors name the offending key") {
  const std::string base = "datasets: [toy]\nmethods: [RW]\nmodels: [logreg]\nseeds: [0]\n";
  CHECK_THROWS_WITH_AS(parse_batch_yaml(base + "split: {train: 0.6, validation: 0.2, test: 0.1}\n"),
                       doctest::Contains("sum to 1"), DataError);
  CHECK_THROWS_WITH_AS(parse_batch_yaml(base + "split: {train: 0.7, valid: 0.3}\n"),
                       doctest::Contains("split.valid"), DataError);
  CHECK_THROWS_WITH_AS(parse_batch_yaml(base + "colour: red\n"), doctest::Contains("colour"), DataError);
  CHECK_THROWS_WITH_AS(parse_batch_yaml("datasets: [toy]\nmodels: [logreg]\nseeds: [0]\n"),
                       doctest::Contains("methods"), DataError);
  CHECK_THROWS_WITH_AS(
      parse_batch_yaml("datasets: [toy]\nmethods: [{name: LFR, params: {depth: 2}}]\nmodels: [logreg]\nseeds: [0]\n"),
      doctest::Contains("methods[0]"), DataError);
  CHECK_THROWS_WITH_AS(parse_batch_yaml(base + "parallelism: 0\n"), doctest::Contains("parallelism"), DataError);
  CHECK_THROWS_WITH_AS(parse_batch_yaml("datasets: [toy]\nmethods: [RW]\nmodels: [logreg]\nseeds: [x]\n"),
                       doctest::Contains("seeds"), DataError);
}

TEST_CASE("expansion is the exact Cartesian product with stable ids") {
  const auto spec = parse_batch_yaml(two_by_two("out"), kFixtures);
  const auto ex = expand_jobs(spec);
  REQUIRE(ex.jobs.size() == 4);
  std::set<std::tuple<std::string, std::string, std::string>> tuples;
  std::set<std::string> ids;
  for (const auto& j : ex.jobs) {
    tuples.insert({j.dataset.name, j.attribute, j.method.params.get_string("repair_level", to_string(j.method.method))});
    ids.insert(j.id());
    CHECK(j.id().size() == 16);
    CHECK(j.id() == sha256_hex(j.canonical()).substr(0, 16));
    CHECK(j.job_seed() == hash64("1:" + j.id()));
  }
  CHECK(tuples == std::set<std::tuple<std::string, std::string, std::string>>{
                      {"toy", "group", "RW"}, {"toy", "group", "0.5"}, {"toy", "region", "RW"}, {"toy", "region", "0.5"}});
  CHECK(ids.size() == 4);
  CHECK(std::is_sorted(ex.jobs.begin(), ex.jobs.end(),
                       [](const JobSpec& a, const JobSpec& b) { return a.canonical() < b.canonical(); }));
  // Reparsing gives the same ids; changing any field changes them.
  const auto again = expand_jobs(parse_batch_yaml(two_by_two("elsewhere"), kFixtures));
  for (std::size_t i = 0; i < 4; ++i) CHECK(again.jobs[i].id() == ex.jobs[i].id());
  auto moved = ex.jobs[0];
  moved.seed = 2;
  CHECK(moved.id() != ex.jobs[0].id());
}

TEST_CASE("attributes missing from a schema are skipped and counted") {
  auto text = two_by_two("out");
  text.replace(text.find("[group, region]"), 15, "[group, age, colour]");
  const auto ex = expand_jobs(parse_batch_yaml(text, kFixtures));
  CHECK(ex.jobs.size() == 2);
  CHECK(ex.skipped == 2);
  CHECK(ex.skipped_pairs == std::vector<std::string>{"toy/age", "toy/colour"});

  auto none = two_by_two("out");
  none.replace(none.find("[group, region]"), 15, "[age]");
  CHECK_THROWS_AS(expand_jobs(parse_batch_yaml(none, kFixtures)), Error);
}

TEST_CASE("a failing job does not stop the others") {
  const auto out = oracle::temp_dir("batch_failure");
  const auto spec = parse_batch_yaml(
      "datasets: [toy]\nsensitive_attributes: [group]\n"
      "methods: [RW, DIR, {name: LFR, params: {k: 1000}}, {name: DIR, params: {repair_level: 0.2}}]\n"
      "models: [logreg]\nseeds: [3]\noutput: " + out.string() + "\n",
      kFixtures);
  const auto ex = expand_jobs(spec);
  const auto report = run_batch(ex.jobs, {out, out / "cache", 2});
  CHECK(report.jobs.size() == 4);
  CHECK(report.failures() == 1);
  for (std::size_t i = 0; i < 4; ++i) {
    const bool lfr = ex.jobs[i].method.method == Method::LFR;
    CHECK(report.jobs[i].status == (lfr ? "failed" : "ok"));
    if (lfr) CHECK(report.jobs[i].error.find("prototype") != std::string::npos);
  }
  const auto doc = nlohmann::json::parse(oracle::read_file(out / "batch_report.json"));
  CHECK(doc.at("failures") == 1);
  CHECK(doc.at("jobs").size() == 4);
  CHECK(fs::exists(out / "metric_table.csv"));
}

TEST_CASE("outputs are identical across parallelism and with a warm cache") {
  const auto a = oracle::temp_dir("batch_serial");
  const auto b = oracle::temp_dir("batch_parallel");
  const auto ex = expand_jobs(parse_batch_yaml(two_by_two("unused"), kFixtures));
  const auto serial = run_batch(ex.jobs, {a, a / "cache", 1});
  const auto parallel = run_batch(ex.jobs, {b, b / "cache", 4});
  CHECK(serial.failures() == 0);
  CHECK(parallel.failures() == 0);
  const auto sa = snapshot(a);
  CHECK(sa.size() == 1 + 4 * 8);  // metric table plus eight files per job
  CHECK(sa == snapshot(b));

  // Rerun into the same directory: every cache entry is reused untouched.
  std::map<std::string, fs::file_time_type> stamps;
  for (const auto& e : fs::directory_iterator(a / "cache")) stamps[e.path().string()] = e.last_write_time();
  const auto warm = run_batch(ex.jobs, {a, a / "cache", 2});
  CHECK(warm.failures() == 0);
  CHECK(snapshot(a) == sa);
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(a / "cache")) {
    ++entries;
    CHECK(stamps.at(e.path().string()) == e.last_write_time());
  }
  CHECK(entries == stamps.size());
}
