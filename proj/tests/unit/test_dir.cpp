#include "fairbench/metrics.hpp"
#include "fairbench/preproc.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <set>

using namespace fairbench;

namespace {

TabularDataset two_groups(const std::vector<double>& g0, const std::vector<double>& g1) {
  TabularDataset ds;
  ds.name = "dir";
  const Index n = static_cast<Index>(g0.size() + g1.size());
  ds.features.resize(n, 2);
  ds.labels.resize(n);
  ds.sensitive.resize(n);
  ds.weights = Vector::Ones(n);
  Index i = 0;
  for (double v : g0) {
    ds.features.row(i) << v, double(i % 2);
    ds.sensitive[i] = 0;
    ds.labels[i] = i % 2;
    ++i;
  }
  for (double v : g1) {
    ds.features.row(i) << v, double(i % 2);
    ds.sensitive[i] = 1;
    ds.labels[i] = (i + 1) % 2;
    ++i;
  }
  ds.columns = {{"x", FeatureKind::Numeric, "x", {}}, {"c=a", FeatureKind::OneHot, "c", "a"}};
  return ds;
}

/// Two-sample Kolmogorov-Smirnov statistic by direct evaluation.
double ks(std::vector<double> a, std::vector<double> b) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  double best = 0;
  for (double t : pts) {
    const double fa = double(std::count_if(a.begin(), a.end(), [&](double v) { return v <= t; })) / a.size();
    const double fb = double(std::count_if(b.begin(), b.end(), [&](double v) { return v <= t; })) / b.size();
    best = std::max(best, std::abs(fa - fb));
  }
  return best;
}

}  // namespace

TEST_CASE("full repair of {1..4} and {5..8} gives {3,4,5,6} in both groups") {
  const auto ds = two_groups({1, 2, 3, 4}, {5, 6, 7, 8});
  const auto out = dir_repair(ds, DirConfig{1.0, 100});
  // Hand oracle: ranks map to u = 0, 1/3, 2/3, 1; the group quantile
  // functions give (1,5), (2,6), (3,7), (4,8) there and the median of each
  // pair is 3, 4, 5, 6.
  for (Index i = 0; i < 4; ++i) {
    CHECK(out.features(i, 0) == doctest::Approx(3.0 + i).epsilon(1e-12));
    CHECK(out.features(i + 4, 0) == doctest::Approx(3.0 + i).epsilon(1e-12));
  }
  // One-hot columns and labels pass through.
  CHECK(out.features.col(1) == ds.features.col(1));
  CHECK(out.labels == ds.labels);
  CHECK(out.weights == ds.weights);
  CHECK(out.sensitive == ds.sensitive);
}

TEST_CASE("repair level zero is the identity and the repair is affine in the level") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> a, b;
  for (int i = 0; i < 37; ++i) a.push_back(g(rng));
  for (int i = 0; i < 53; ++i) b.push_back(2 + 3 * g(rng));
  const auto ds = two_groups(a, b);
  CHECK(dir_repair(ds, DirConfig{0.0, 100}).features == ds.features);
  const Matrix full = dir_repair(ds, DirConfig{1.0, 100}).features;
  for (double lambda : {0.25, 0.5, 0.8}) {
    const Matrix part = dir_repair(ds, DirConfig{lambda, 100}).features;
    const Matrix expect = (1 - lambda) * ds.features + lambda * full;
    CHECK((part - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("full repair makes group distributions match and keeps ranks") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    std::vector<double> a, b;
    const int na = 30 + int(seed) * 7, nb = 80 - int(seed) * 3;
    for (int i = 0; i < na; ++i) a.push_back(std::exp(g(rng)));
    for (int i = 0; i < nb; ++i) b.push_back(1 + 2 * g(rng));
    const auto ds = two_groups(a, b);
    for (int grid : {100, 25}) {
      const auto out = dir_repair(ds, DirConfig{1.0, grid});
      std::vector<double> ra, rb;
      for (Index i = 0; i < out.size(); ++i) (out.sensitive[i] ? rb : ra).push_back(out.features(i, 0));
      CHECK(ks(ra, rb) <= 1.0 / grid + 1.0 / std::min(na, nb) + 1e-12);
      // Within-group order is preserved (Spearman correlation 1).
      for (Index i = 0; i < out.size(); ++i)
        for (Index j = 0; j < out.size(); ++j)
          if (ds.sensitive[i] == ds.sensitive[j] && ds.features(i, 0) < ds.features(j, 0))
            CHECK(out.features(i, 0) <= out.features(j, 0));
    }
  }
}

TEST_CASE("dir leaves label metrics untouched") {
  const auto ds = make_synthetic(9, 400, 0.4);
  const auto out = dir_repair(ds, DirConfig{});
  const auto before = dataset_metrics(ds), after = dataset_metrics(out);
  CHECK(after.base_rate == before.base_rate);
  CHECK(after.disparate_impact == before.disparate_impact);
  CHECK(after.statistical_parity_difference == before.statistical_parity_difference);
  CHECK(after.empirical_difference == before.empirical_difference);
  CHECK(after.num_positives == before.num_positives);
  CHECK(out.provenance.ends_with("DIR"));
}

TEST_CASE("a column constant within a group passes through with a warning") {
  const auto ds = two_groups({2, 2, 2, 2}, {1, 5, 6, 9});
  WarningCapture warnings;
  const auto out = dir_repair(ds, DirConfig{});
  CHECK(warnings.contains("constant"));
  CHECK(out.features == ds.features);
}

TEST_CASE("dir fitted on one split applies to another") {
  const auto ds = make_synthetic(2, 300, 0.3);
  const auto sp = split(ds, SplitSpec{});
  const auto model = dir_fit(sp.train, DirConfig{});
  const auto test = dir_apply(model, sp.test);
  CHECK(test.size() == sp.test.size());
  CHECK(test.labels == sp.test.labels);
  CHECK_THROWS_AS(dir_fit(ds, DirConfig{1.5, 100}), Error);
}

TEST_CASE("tied values are spread over their rank interval") {
  // Discrete column: group 0 is mostly 1s, group 1 mostly 2s.
  std::vector<double> a, b;
  for (int i = 0; i < 60; ++i) a.push_back(i < 45 ? 1.0 : 2.0);
  for (int i = 0; i < 40; ++i) b.push_back(i < 10 ? 1.0 : 2.0);
  const auto ds = two_groups(a, b);
  const auto out = dir_repair(ds, DirConfig{1.0, 100});
  std::vector<double> ra, rb;
  for (Index i = 0; i < 60; ++i) ra.push_back(out.features(i, 0));
  for (Index i = 60; i < 100; ++i) rb.push_back(out.features(i, 0));
  CHECK(ks(ra, rb) <= 1.0 / 100 + 1.0 / 40);
  // Ties are broken by index: earlier records get lower repaired values.
  for (Index i = 1; i < 45; ++i) CHECK(out.features(i, 0) >= out.features(i - 1, 0));
  CHECK(out.features(44, 0) > out.features(0, 0));
}
