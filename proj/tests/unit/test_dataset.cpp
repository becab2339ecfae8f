#include "fairbench/cache.hpp"
#include "fairbench/dataset.hpp"
#include "fairbench/metrics.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <set>
#include <sstream>
#include <thread>

using namespace fairbench;

namespace {

RawTable table_from(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

DatasetSchema credit_schema() {
  DatasetSchema s;
  s.name = "toy";
  s.label_column = "credit";
  s.favorable_value = "good";
  s.protected_column = "sex";
  s.privileged_values = {"M"};
  s.numeric_columns = {"age"};
  s.categorical_columns = {"job"};
  return s;
}

const char* kCreditCsv =
    "age,sex,job,credit\n"
    "25,M,clerk,good\n"
    "40,F,manager,bad\n"
    "33,F,clerk,good\n"
    "51,M,owner,bad\n";

}  // namespace

TEST_CASE("csv reader handles quoting and reports ragged rows") {
  const auto t = table_from("a,b,c\n1,\"x, y\",\"say \"\"hi\"\"\"\n2,,z\n");
  REQUIRE(t.size() == 2);
  CHECK(t.columns == std::vector<std::string>{"a", "b", "c"});
  CHECK(t.rows[0][1] == "x, y");
  CHECK(t.rows[0][2] == "say \"hi\"");
  CHECK(t.rows[1][1].empty());

  try {
    table_from("a,b\n1,2\n3\n");
    FAIL("ragged row accepted");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}

TEST_CASE("csv write then read is the identity") {
  const auto t = table_from("a,b\n\"1,5\",\"q\"\"\"\nx,\n");
  std::ostringstream out;
  write_csv(out, t);
  const auto back = table_from(out.str());
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);
}

TEST_CASE("load_csv names a missing label column") {
  const auto dir = oracle::temp_dir("load_csv");
  {
    std::ofstream f(dir / "three.csv");
    f << "age,sex,income\n30,M,1\n40,F,0\n50,M,1\n";
  }
  DatasetSchema s;
  s.name = "x";
  s.label_column = "income";
  s.favorable_value = "1";
  s.protected_column = "sex";
  s.privileged_values = {"M"};
  s.numeric_columns = {"age"};
  CHECK(load_csv(dir / "three.csv", s).size() == 3);

  s.label_column = "outcome";
  try {
    load_csv(dir / "three.csv", s);
    FAIL("missing label accepted");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("outcome") != std::string::npos);
  }
  CHECK_THROWS_AS(load_csv(dir / "absent.csv", s), DataError);
}

TEST_CASE("encode maps label, group and one-hot columns") {
  const auto ds = encode(table_from(kCreditCsv), credit_schema());
  CHECK(ds.size() == 4);
  CHECK(ds.labels == IntVector((IntVector(4) << 1, 0, 1, 0).finished()));
  CHECK(ds.sensitive == IntVector((IntVector(4) << 1, 0, 0, 1).finished()));
  CHECK(ds.weights == Vector::Ones(4));
  // age + three job levels in first-seen order; sex is not a feature
  REQUIRE(ds.dims() == 4);
  CHECK(ds.columns[1].name == "job=clerk");
  CHECK(ds.columns[2].name == "job=manager");
  CHECK(ds.columns[3].name == "job=owner");
  for (const auto& c : ds.columns) CHECK(c.source != "sex");
  CHECK(ds.features.rightCols(3).rowwise().sum() == Vector::Ones(4));

  auto with_sex = credit_schema();
  with_sex.protected_as_feature = true;
  with_sex.categorical_columns.push_back("sex");
  CHECK(encode(table_from(kCreditCsv), with_sex).dims() == 6);
}

TEST_CASE("binarization rule thresholds a utilisation score") {
  DatasetSchema s;
  s.name = "meps-like";
  s.label_column = "UTILIZATION";
  s.favorable_value = "1";
  s.protected_column = "RACE";
  s.privileged_values = {"White"};
  s.numeric_columns = {"AGE"};
  s.binarization.push_back({"UTILIZATION", CompareOp::GreaterEqual, {"10"}, "1", "0", ""});
  const auto ds = encode(table_from("AGE,RACE,UTILIZATION\n30,White,3\n40,Black,10\n50,White,15\n"), s);
  CHECK(ds.labels == IntVector((IntVector(3) << 0, 1, 1).finished()));
}

TEST_CASE("missing cells drop rows with a warning; bad numerics are errors") {
  auto s = credit_schema();
  s.missing_markers = {"?"};
  WarningCapture warnings;
  EncodeStats stats;
  const auto ds = encode(table_from("age,sex,job,credit\n25,M,?,good\n40,F,clerk,bad\n,F,clerk,good\n33,M,x,bad\n"),
                         s, &stats);
  CHECK(ds.size() == 2);
  CHECK(stats.dropped_rows == 2);
  CHECK(warnings.contains("dropped 2 rows"));

  CHECK_THROWS_AS(encode(table_from("age,sex,job,credit\nold,M,a,good\n"), s), DataError);
}

TEST_CASE("unseen categories encode as an all-zero block") {
  const auto enc = Encoder::fit(table_from(kCreditCsv), credit_schema());
  WarningCapture warnings;
  EncodeStats stats;
  const auto ds = enc.transform(table_from("age,sex,job,credit\n30,M,pilot,good\n30,F,clerk,bad\n"), &stats);
  CHECK(stats.unseen_categories == 1);
  CHECK(warnings.contains("pilot"));
  CHECK(ds.features.row(0).tail(3).isZero());
  CHECK(ds.features(1, 1) == 1.0);
}

TEST_CASE("schema yaml resolves sensitive attribute options") {
  const auto file = parse_schema_yaml(R"(
name: toy
label: credit
favorable: good
sensitive_attributes:
  sex: {privileged: [M]}
  senior:
    column: age_over_40
    privileged: ["1"]
default_attribute: sex
binarize:
  - {column: age, op: ">", value: 40, output: age_over_40}
numeric: [age]
categorical: [job]
)");
  CHECK(file.has_attribute("sex"));
  CHECK_FALSE(file.has_attribute("race"));
  const auto sex = file.resolve();
  CHECK(sex.protected_column == "sex");
  const auto senior = file.resolve("senior");
  CHECK(senior.protected_column == "age_over_40");
  const auto ds = encode(table_from(kCreditCsv), senior);
  CHECK(ds.sensitive == IntVector((IntVector(4) << 0, 0, 0, 1).finished()));
  CHECK_THROWS_AS(file.resolve("race"), Error);
  CHECK_THROWS_AS(parse_schema_yaml("name: x\nlabel: y\nfavorable: 1\nprotected: s\nprivileged: [a]\nnumeric: [q]\nbogus: 1\n"),
                  DataError);
}

TEST_CASE("every shipped schema parses") {
  for (const char* name : {"german", "adult", "compas", "bank", "meps"}) {
    CAPTURE(name);
    const auto file = load_schema(std::filesystem::path(FAIRBENCH_SCHEMA_DIR) / (std::string(name) + ".yaml"));
    CHECK(file.base.name == name);
    CHECK_NOTHROW(file.resolve().validate());
  }
}

TEST_CASE("split sizes follow the rounding rule") {
  const SplitSpec spec;
  CHECK(split_sizes(100, spec) == std::array<Index, 3>{70, 15, 15});
  CHECK(split_sizes(101, spec) == std::array<Index, 3>{71, 15, 15});
  for (Index n = 10; n <= 400; ++n) {
    const auto s = split_sizes(n, spec);
    CHECK(s[0] + s[1] + s[2] == n);
    // Hand rule: held-out parts are the nearest integers, train takes the rest.
    CHECK(s[1] == static_cast<Index>(std::floor(n * 0.15 + 0.5)));
    CHECK(s[2] == static_cast<Index>(std::floor(n * 0.15 + 0.5)));
  }
  CHECK_THROWS_AS(split_sizes(10, SplitSpec{0.9, 0.0, 0.0, 0}), DataError);
}

TEST_CASE("split is a seeded stratified partition") {
  const auto ds = make_synthetic(3, 101, 0.4);
  SplitSpec spec;
  spec.seed = 7;
  const auto a = split_indices(ds, spec);
  const auto b = split_indices(ds, spec);
  CHECK(a.train == b.train);
  CHECK(a.validation == b.validation);
  CHECK(a.test == b.test);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.train.size() == 71);

  std::set<Index> all;
  for (const auto* part : {&a.train, &a.validation, &a.test})
    for (Index i : *part) CHECK(all.insert(i).second);
  CHECK(all.size() == 101);

  // Per-cell counts stay within one of exact proportionality.
  for (int cell = 0; cell < 4; ++cell) {
    double total = 0;
    for (Index i = 0; i < ds.size(); ++i) total += (ds.labels[i] * 2 + ds.sensitive[i] == cell);
    for (const auto& [part, frac] : {std::pair{&a.validation, 0.15}, std::pair{&a.test, 0.15}}) {
      double got = 0;
      for (Index i : *part) got += (ds.labels[i] * 2 + ds.sensitive[i] == cell);
      CHECK(std::abs(got - total * frac) <= 1.0);
    }
  }

  spec.seed = 8;
  CHECK(split_indices(ds, spec).fingerprint() != a.fingerprint());
}

TEST_CASE("split falls back to label strata when a cell is empty") {
  auto ds = make_synthetic(1, 40, 0.0);
  for (Index i = 0; i < ds.size(); ++i)
    if (ds.sensitive[i] == 0) ds.labels[i] = 0;
  WarningCapture warnings;
  const auto idx = split_indices(ds, SplitSpec{});
  CHECK_FALSE(idx.stratified_by_group);
  CHECK(warnings.contains("label only"));
}

TEST_CASE("cache round trip is bit exact") {
  const auto dir = oracle::temp_dir("cache");
  const DatasetCache cache(dir);
  auto ds = make_synthetic(5, 50, 0.3);
  ds.weights = ds.weights * (1.0 / 3.0);
  ds.features(0, 0) = 1e-310;  // subnormal
  ds.features(1, 1) = -0.0;
  const auto key = CacheKey::make("synthetic", "RW", "{}", 5);
  CHECK_FALSE(cache.load(key).has_value());
  CHECK(cache.store(ds, key) == key.hex);
  const auto back = cache.load(key);
  REQUIRE(back.has_value());
  CHECK(*back == ds);
  CHECK(std::signbit(back->features(1, 1)));
  CHECK(back->columns == ds.columns);
  CHECK(back->provenance == ds.provenance);

  const std::string bytes = oracle::read_file(cache.entry_path(key));
  CHECK(bytes.substr(0, 8) == "FPDSTXT\n");

  // A second store under the same key replaces the entry.
  auto other = make_synthetic(6, 50, 0.3);
  cache.store(other, key);
  CHECK(*cache.load(key) == other);
  std::size_t entries = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) entries += e.path().extension() == ".fpds";
  CHECK(entries == 1);

  CHECK(CacheKey::make("a", "RW", "{}", 1) != CacheKey::make("a", "RW", "{}", 2));
  CHECK(CacheKey::make("a", "RW", "{}", 1) != CacheKey::make("a", "DIR", "{}", 1));
  CHECK(CacheKey::make("a", "RW", "{}", 1) == CacheKey::make("a", "RW", "{}", 1));
}

TEST_CASE("concurrent stores never expose a partial entry") {
  const auto dir = oracle::temp_dir("cache_race");
  const DatasetCache cache(dir);
  const auto a = make_synthetic(1, 2000, 0.2);
  const auto b = make_synthetic(2, 2000, 0.2);
  const auto key = CacheKey::make("race", "RW", "{}", 0);
  cache.store(a, key);
  std::atomic<bool> bad{false};
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t)
      threads.emplace_back([&, t] {
        for (int r = 0; r < 10; ++r) {
          cache.store(t % 2 ? a : b, key);
          const auto got = cache.load(key);
          if (!got || !(*got == a || *got == b)) bad = true;
        }
      });
  }
  CHECK_FALSE(bad);
}

TEST_CASE("fpds reader rejects foreign files") {
  std::istringstream junk("NOTAFPDS\n1\n");
  CHECK_THROWS_AS(read_fpds(junk), DataError);
}

TEST_CASE("synthetic generator is seeded and has the requested disparity") {
  CHECK(make_synthetic(11, 200, 0.4) == make_synthetic(11, 200, 0.4));
  double fair = 0, unfair = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    fair += statistical_parity_difference(make_synthetic(seed, 2000, 0.0));
    unfair += statistical_parity_difference(make_synthetic(seed, 2000, 0.4));
  }
  CHECK(std::abs(fair / 20) < 0.1);
  CHECK(std::abs(unfair / 20 + 0.4) <= 0.05);
  CHECK_THROWS_AS(make_synthetic(0, 4, 0.1), DataError);
}
