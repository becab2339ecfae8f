#pragma once

// Independent reference implementations used as test oracles. They work on
// plain std::vector and explicit loops, sharing no code with the library.

#include "fairbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

struct Fixture {
  std::vector<int> y, s, pred;
  std::vector<double> w, score;
  std::vector<std::vector<double>> x;
};

/// Random fixture with both groups and both labels present.
inline Fixture random_fixture(std::uint64_t seed, int n, int d = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> bit(0, 1);
  std::uniform_real_distribution<double> unif(0.1, 3.0);
  std::uniform_int_distribution<int> grid(0, 4);
  Fixture f;
  for (int i = 0; i < n; ++i) {
    f.y.push_back(bit(rng));
    f.s.push_back(bit(rng));
    f.pred.push_back(bit(rng));
    f.w.push_back(unif(rng));
    f.score.push_back(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    std::vector<double> row;
    // Coarse integer grid so distance ties actually occur.
    for (int j = 0; j < d; ++j) row.push_back(grid(rng));
    f.x.push_back(row);
  }
  // Force every (y, s) cell to be populated.
  for (int c = 0; c < 4 && c < n; ++c) {
    f.y[c] = c / 2;
    f.s[c] = c % 2;
  }
  return f;
}

inline fairbench::TabularDataset to_dataset(const Fixture& f) {
  const auto n = static_cast<fairbench::Index>(f.y.size());
  const auto d = static_cast<fairbench::Index>(f.x.empty() ? 0 : f.x[0].size());
  fairbench::TabularDataset ds;
  ds.name = "fixture";
  ds.features.resize(n, d);
  ds.labels.resize(n);
  ds.sensitive.resize(n);
  ds.weights.resize(n);
  for (fairbench::Index i = 0; i < n; ++i) {
    ds.labels[i] = f.y[i];
    ds.sensitive[i] = f.s[i];
    ds.weights[i] = f.w[i];
    for (fairbench::Index j = 0; j < d; ++j) ds.features(i, j) = f.x[i][j];
  }
  for (fairbench::Index j = 0; j < d; ++j)
    ds.columns.push_back({"x" + std::to_string(j), fairbench::FeatureKind::Numeric, "x" + std::to_string(j), {}});
  return ds;
}

/// Weighted P(v = 1 | s == group); group -1 means everyone.
inline double rate(const std::vector<int>& v, const std::vector<int>& s, const std::vector<double>& w, int group) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (group >= 0 && s[i] != group) continue;
    den += w[i];
    if (v[i] == 1) num += w[i];
  }
  return num / den;
}

inline double empirical_difference(const std::vector<int>& y, const std::vector<int>& s, const std::vector<double>& w) {
  double cnt[2][2] = {{0, 0}, {0, 0}}, tot[2] = {0, 0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    cnt[s[i]][y[i]] += w[i];
    tot[s[i]] += w[i];
  }
  double best = 0;
  for (int v = 0; v < 2; ++v) {
    const double p0 = (cnt[0][v] + 0.5) / (tot[0] + 1.0);
    const double p1 = (cnt[1][v] + 0.5) / (tot[1] + 1.0);
    best = std::max(best, std::abs(std::log(p0 / p1)));
  }
  return best;
}

/// Consistency by exhaustive neighbour search on already scaled points.
inline double consistency(const std::vector<std::vector<double>>& x, const std::vector<int>& y, int k) {
  const std::size_t n = x.size();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0;
      for (std::size_t c = 0; c < x[i].size(); ++c) d += (x[i][c] - x[j][c]) * (x[i][c] - x[j][c]);
      all.emplace_back(d, j);
    }
    // Ties are distances equal up to rounding; the lower index wins.
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (std::abs(a.first - b.first) <= 1e-9 * std::max(a.first, b.first)) return a.second < b.second;
      return a.first < b.first;
    });
    double mean = 0;
    for (int m = 0; m < k; ++m) mean += y[all[m].second];
    total += std::abs(y[i] - mean / k);
  }
  return 1.0 - total / n;
}

inline std::vector<std::vector<double>> zscore(const std::vector<std::vector<double>>& x) {
  auto z = x;
  const std::size_t n = x.size();
  for (std::size_t c = 0; c < x[0].size(); ++c) {
    double mean = 0, var = 0;
    for (const auto& r : x) mean += r[c];
    mean /= n;
    for (const auto& r : x) var += (r[c] - mean) * (r[c] - mean);
    var /= n;
    for (std::size_t i = 0; i < n; ++i) z[i][c] = var > 0 ? (x[i][c] - mean) / std::sqrt(var) : 0.0;
  }
  return z;
}

struct Rates {
  double tpr, fpr, tnr, fnr;
};

inline Rates rates(const Fixture& f, const std::vector<int>& pred, int group) {
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < f.y.size(); ++i) {
    if (group >= 0 && f.s[i] != group) continue;
    if (f.y[i] == 1 && pred[i] == 1) tp += f.w[i];
    if (f.y[i] == 0 && pred[i] == 1) fp += f.w[i];
    if (f.y[i] == 0 && pred[i] == 0) tn += f.w[i];
    if (f.y[i] == 1 && pred[i] == 0) fn += f.w[i];
  }
  return {tp / (tp + fn), fp / (fp + tn), tn / (fp + tn), fn / (tp + fn)};
}

inline double theil(const std::vector<int>& y, const std::vector<int>& pred) {
  const std::size_t n = y.size();
  std::vector<double> b(n);
  double mu = 0;
  for (std::size_t i = 0; i < n; ++i) mu += b[i] = pred[i] - y[i] + 1.0;
  mu /= n;
  if (mu == 0) return 0;
  double t = 0;
  for (double v : b)
    if (v > 0) t += v / mu * std::log(v / mu);
  return t / n;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("fairbench_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
