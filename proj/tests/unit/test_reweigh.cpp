#include "fairbench/metrics.hpp"
#include "fairbench/preproc.hpp"

#include "oracles.hpp"

#include <doctest.h>

using namespace fairbench;

namespace {

TabularDataset eight_rows() {
  TabularDataset ds;
  ds.name = "eight";
  ds.features = Matrix::Zero(8, 1);
  ds.columns = {{"x", FeatureKind::Numeric, "x", {}}};
  // Group 0 (b): 1 of 4 positive; group 1 (a): 3 of 4 positive.
  ds.labels = (IntVector(8) << 1, 0, 0, 0, 1, 1, 1, 0).finished();
  ds.sensitive = (IntVector(8) << 0, 0, 0, 0, 1, 1, 1, 1).finished();
  ds.weights = Vector::Ones(8);
  return ds;
}

}  // namespace

TEST_CASE("reweighing cell weights on the hand fixture") {
  const auto r = reweigh(eight_rows());
  CHECK(r.cell_weights[1][1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.cell_weights[1][0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(r.cell_weights[0][1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(r.cell_weights[0][0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  const auto& w = r.dataset.weights;
  const auto& y = r.dataset.labels;
  for (int g = 0; g < 2; ++g) {
    double pos = 0, tot = 0;
    for (Index i = 0; i < 8; ++i)
      if (r.dataset.sensitive[i] == g) {
        tot += w[i];
        pos += w[i] * y[i];
      }
    CHECK(pos / tot == doctest::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("independent label and group leave weights at one") {
  auto ds = eight_rows();
  ds.labels = (IntVector(8) << 1, 1, 0, 0, 1, 1, 0, 0).finished();
  const auto r = reweigh(ds);
  CHECK(r.dataset.weights.isApprox(Vector::Ones(8), 1e-15));
}

TEST_CASE("reweighing equalises weighted group rates on random inputs") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CAPTURE(seed);
    const auto ds = seed % 2 ? make_synthetic(seed, 500, 0.6) : oracle::to_dataset(oracle::random_fixture(seed, 40));
    const auto r = reweigh(ds);
    CHECK(std::abs(disparate_impact(r.dataset) - 1.0) <= 1e-12);
    CHECK(std::abs(statistical_parity_difference(r.dataset)) <= 1e-12);
    CHECK(r.dataset.labels == ds.labels);
    CHECK(r.dataset.sensitive == ds.sensitive);
    CHECK(r.dataset.features == ds.features);
    CHECK((r.dataset.weights.array() > 0).all());
    // The reweighted base rate is the input's.
    CHECK(base_rate(r.dataset) == doctest::Approx(base_rate(ds)).epsilon(1e-12));
    // Applying it twice changes nothing more.
    const auto again = reweigh(r.dataset);
    for (const auto& row : again.cell_weights)
      for (double v : row) CHECK(std::abs(v - 1.0) <= 1e-9);
    CHECK(r.dataset.provenance.ends_with("RW"));
  }
}

TEST_CASE("reweighing names an empty cell") {
  auto ds = eight_rows();
  ds.labels.head(4).setZero();
  try {
    reweigh(ds);
    FAIL("empty cell accepted");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("group 0, label 1") != std::string::npos);
  }
}
