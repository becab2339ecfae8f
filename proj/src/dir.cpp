#include "fairbench/preproc.hpp"

#include <algorithm>
#include <cmath>

namespace fairbench {
namespace {

// CDF position of a value absent from the fitted group: linear between the
// neighbouring tie blocks, clamped at the ends.
double gap_position(const std::vector<double>& xs, const std::vector<double>& lo, const std::vector<double>& hi,
                    double x) {
  if (x <= xs.front()) return lo.front();
  if (x >= xs.back()) return hi.back();
  const auto k = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
  const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return hi[k - 1] + t * (lo[k] - hi[k - 1]);
}

// Empirical quantile of sorted values at level q in [0, 1].
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Value on the uniform grid u_m = m / (G - 1).
double grid_lookup(const std::vector<double>& grid, double q) {
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(grid.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, grid.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return grid[lo] + frac * (grid[hi] - grid[lo]);
}

}  // namespace

DirModel dir_fit(const TabularDataset& ds, const DirConfig& cfg) {
  ds.validate();
  if (!(cfg.repair_level >= 0.0 && cfg.repair_level <= 1.0))
    throw Error("dir: repair level must lie in [0, 1]");
  if (cfg.grid_size < 2) throw Error("dir: grid size must be at least 2");
  const Index n1 = ds.sensitive.sum();
  if (n1 == 0 || n1 == ds.size()) throw DataError("dir: both groups must be present");

  DirModel model;
  model.config = cfg;
  for (Index j : ds.numeric_feature_indices()) {
    DirModel::Column col;
    col.column = j;
    std::array<std::vector<double>, 2> sorted;
    for (Index i = 0; i < ds.size(); ++i) sorted[ds.sensitive[i]].push_back(ds.features(i, j));
    for (auto& v : sorted) std::sort(v.begin(), v.end());
    for (int s = 0; s < 2; ++s) {
      if (sorted[s].front() == sorted[s].back()) {
        warn("dir: column '" + ds.columns[j].name + "' is constant within group " +
             std::to_string(s) + "; passed through unchanged");
        col.passthrough = true;
      }
    }
    if (!col.passthrough) {
      for (int s = 0; s < 2; ++s) {
        const auto& v = sorted[s];
        const double denom = static_cast<double>(v.size() - 1);
        for (std::size_t a = 0; a < v.size();) {
          std::size_t b = a;
          while (b + 1 < v.size() && v[b + 1] == v[a]) ++b;
          col.values[s].push_back(v[a]);
          col.cdf_lo[s].push_back(static_cast<double>(a) / denom);
          col.cdf_hi[s].push_back(static_cast<double>(b) / denom);
          a = b + 1;
        }
      }
      col.target.resize(static_cast<std::size_t>(cfg.grid_size));
      for (int m = 0; m < cfg.grid_size; ++m) {
        const double u = static_cast<double>(m) / static_cast<double>(cfg.grid_size - 1);
        // Median of two values is their mean.
        col.target[m] = 0.5 * (quantile(sorted[0], u) + quantile(sorted[1], u));
      }
    }
    model.columns.push_back(std::move(col));
  }
  return model;
}

TabularDataset dir_apply(const DirModel& model, const TabularDataset& ds) {
  TabularDataset out = ds;
  const double lambda = model.config.repair_level;
  std::array<std::vector<Index>, 2> members;
  for (Index i = 0; i < ds.size(); ++i) members[ds.sensitive[i]].push_back(i);
  for (const auto& col : model.columns) {
    if (col.passthrough) continue;
    if (col.column >= ds.dims()) throw Error("dir: dataset has fewer columns than the fitted model");
    const auto x = ds.features.col(col.column);
    for (int s = 0; s < 2; ++s) {
      const auto& xs = col.values[s];
      auto rows = members[s];
      std::stable_sort(rows.begin(), rows.end(), [&](Index a, Index b) { return x[a] < x[b]; });
      for (std::size_t a = 0; a < rows.size();) {
        std::size_t b = a;
        while (b + 1 < rows.size() && x[rows[b + 1]] == x[rows[a]]) ++b;
        // A fitted tie block spreads its records over [lo, hi] by index.
        double lo, hi;
        const auto it = std::lower_bound(xs.begin(), xs.end(), x[rows[a]]);
        if (it != xs.end() && *it == x[rows[a]]) {
          lo = col.cdf_lo[s][it - xs.begin()];
          hi = col.cdf_hi[s][it - xs.begin()];
        } else {
          lo = hi = gap_position(xs, col.cdf_lo[s], col.cdf_hi[s], x[rows[a]]);
        }
        const std::size_t m = b - a + 1;
        for (std::size_t r = 0; r < m; ++r) {
          const double q = xs.size() == 1 ? 0.5 : m == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * double(r) / double(m - 1);
          const Index i = rows[a + r];
          out.features(i, col.column) = (1.0 - lambda) * x[i] + lambda * grid_lookup(col.target, q);
        }
        a = b + 1;
      }
    }
  }
  out.provenance = extend_provenance(ds.provenance, "DIR");
  return out;
}

TabularDataset dir_repair(const TabularDataset& ds, const DirConfig& cfg) {
  return dir_apply(dir_fit(ds, cfg), ds);
}

}  // namespace fairbench
