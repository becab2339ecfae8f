#include "fairbench/preproc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace fairbench {
namespace {

constexpr double kMaxCells = 1e4;
constexpr double kInteriorMix = 1e-4;   // uniform mass mixed into the initial identity table
constexpr double kReferenceSmoothing = 1e-4;
constexpr double kArmijo = 1e-4;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

OppAttribute discretize_numeric(const TabularDataset& ds, Index col, int bins) {
  OppAttribute a;
  a.source = ds.columns[col].source;
  a.kind = FeatureKind::Numeric;
  a.feature_columns = {col};
  std::vector<double> v(ds.features.col(col).data(), ds.features.col(col).data() + ds.size());
  std::sort(v.begin(), v.end());
  std::vector<double> distinct = v;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> cuts;
  if (distinct.size() <= static_cast<std::size_t>(bins)) {
    for (std::size_t i = 1; i < distinct.size(); ++i) cuts.push_back(0.5 * (distinct[i - 1] + distinct[i]));
  } else {
    for (int k = 1; k < bins; ++k) {
      const double c = v[static_cast<std::size_t>(k) * v.size() / static_cast<std::size_t>(bins)];
      if (c > v.front() && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
    }
  }
  a.edges.push_back(v.front());
  a.edges.insert(a.edges.end(), cuts.begin(), cuts.end());
  a.edges.push_back(v.back());

  std::vector<std::vector<double>> members(cuts.size() + 1);
  for (double x : v) {
    const auto b = std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin();
    members[static_cast<std::size_t>(b)].push_back(x);
  }
  for (auto& m : members) a.bin_medians.push_back(median_of(std::move(m)));
  return a;
}

std::vector<OppAttribute> build_attributes(const TabularDataset& ds, const OppConfig& cfg) {
  std::vector<std::string> sources;
  for (const auto& c : ds.columns)
    if (std::find(sources.begin(), sources.end(), c.source) == sources.end()) sources.push_back(c.source);
  std::vector<std::string> chosen = cfg.columns.empty() ? sources : cfg.columns;
  for (const auto& name : chosen)
    if (std::find(sources.begin(), sources.end(), name) == sources.end())
      throw Error("opp: unknown column '" + name + "'");

  std::vector<OppAttribute> attrs;
  for (const auto& name : chosen) {
    std::vector<Index> cols;
    for (Index j = 0; j < ds.dims(); ++j)
      if (ds.columns[j].source == name) cols.push_back(j);
    if (ds.columns[cols.front()].kind == FeatureKind::Numeric) {
      attrs.push_back(discretize_numeric(ds, cols.front(), cfg.bins));
    } else {
      OppAttribute a;
      a.source = name;
      a.kind = FeatureKind::OneHot;
      a.feature_columns = cols;
      attrs.push_back(std::move(a));
    }
  }
  return attrs;
}

std::vector<int> digits_of(const std::vector<OppAttribute>& attrs, Index x) {
  std::vector<int> d(attrs.size());
  for (std::size_t a = attrs.size(); a-- > 0;) {
    const int card = attrs[a].cardinality();
    d[a] = static_cast<int>(x % card);
    x /= card;
  }
  return d;
}

struct Evaluation {
  OppObjective parts;
  Vector joint;          // p_hat over target cells
  Vector row_distortion; // expected distortion per source cell
};

struct Problem {
  const OppMap& map;
  Matrix delta;     // distortion per (source row, target cell)
  IntVector row_group;

  Evaluation evaluate(const Matrix& t) const {
    Evaluation ev;
    ev.joint = t.transpose() * map.source_mass;
    double kl = 0.0;
    for (Index c = 0; c < ev.joint.size(); ++c)
      if (ev.joint[c] > 0.0) kl += ev.joint[c] * std::log(ev.joint[c] / map.reference[c]);
    ev.parts.kl = kl;

    std::array<double, 2> positive{0.0, 0.0};
    for (Index r = 0; r < t.rows(); ++r) {
      double p1 = 0.0;
      for (Index c = 1; c < t.cols(); c += 2) p1 += t(r, c);
      positive[row_group[r]] += map.source_mass[r] * p1;
    }
    double fair = 0.0;
    for (int s = 0; s < 2; ++s) {
      ev.parts.group_rates[s] = positive[s] / map.group_mass[s];
      const double h = std::max(std::abs(ev.parts.group_rates[s] / map.target_rate - 1.0) - map.epsilon, 0.0);
      fair += h * h;
    }
    ev.parts.fairness = fair;

    ev.row_distortion = (t.array() * delta.array()).rowwise().sum();
    double dist = 0.0;
    for (Index r = 0; r < t.rows(); ++r) {
      const double h = std::max(ev.row_distortion[r] - map.distortion_budget, 0.0);
      dist += map.source_mass[r] * h * h;
    }
    ev.parts.distortion = dist;
    return ev;
  }

  Matrix gradient(const Matrix& t, const Evaluation& ev, double rho) const {
    const Index R = t.rows();
    const Index C = t.cols();
    Eigen::RowVectorXd dkl(C);
    for (Index c = 0; c < C; ++c)
      dkl[c] = std::log(std::max(ev.joint[c], 1e-300) / map.reference[c]) + 1.0;
    Matrix g = map.source_mass * dkl;

    std::array<double, 2> dfair{};
    for (int s = 0; s < 2; ++s) {
      const double dev = ev.parts.group_rates[s] / map.target_rate - 1.0;
      const double h = std::max(std::abs(dev) - map.epsilon, 0.0);
      dfair[s] = 2.0 * h * (dev > 0.0 ? 1.0 : -1.0) / map.target_rate;
    }
    for (Index r = 0; r < R; ++r) {
      const double m = map.source_mass[r];
      const double f = rho * m * dfair[row_group[r]] / map.group_mass[row_group[r]];
      if (f != 0.0)
        for (Index c = 1; c < C; c += 2) g(r, c) += f;
      const double h = std::max(ev.row_distortion[r] - map.distortion_budget, 0.0);
      if (h > 0.0) g.row(r) += (rho * m * 2.0 * h) * delta.row(r);
    }
    return g;
  }
};

}  // namespace

int OppAttribute::cardinality() const {
  return kind == FeatureKind::Numeric ? static_cast<int>(edges.size()) - 1
                                      : static_cast<int>(feature_columns.size());
}

Index OppMap::encode_features(const Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>& row, bool* clamped) const {
  Index x = 0;
  bool out_of_range = false;
  for (const auto& a : attributes) {
    int digit = 0;
    if (a.kind == FeatureKind::Numeric) {
      const double v = row[a.feature_columns.front()];
      if (v < a.edges.front() || v > a.edges.back()) out_of_range = true;
      digit = static_cast<int>(std::upper_bound(a.edges.begin() + 1, a.edges.end() - 1, v) -
                               (a.edges.begin() + 1));
    } else {
      int hot = -1;
      for (std::size_t k = 0; k < a.feature_columns.size(); ++k)
        if (row[a.feature_columns[k]] > 0.5) hot = static_cast<int>(k);
      if (hot < 0) {
        out_of_range = true;
        hot = 0;
      }
      digit = hot;
    }
    x = x * a.cardinality() + digit;
  }
  if (clamped) *clamped = out_of_range;
  return x;
}

Vector OppMap::row_for(Index x, int y, int s) const {
  const Index cell = (x * 2 + y) * 2 + s;
  const auto it = std::lower_bound(source_cells.begin(), source_cells.end(), cell);
  if (it != source_cells.end() && *it == cell) return transition.row(it - source_cells.begin()).transpose();
  Vector e = Vector::Zero(domain_size * 2);
  e[x * 2 + y] = 1.0;
  return e;
}

double OppMap::distortion(Index x, int y, Index x_hat, int y_hat) const {
  const auto a = digits_of(attributes, x);
  const auto b = digits_of(attributes, x_hat);
  int differ = 0;
  for (std::size_t k = 0; k < a.size(); ++k) differ += a[k] != b[k];
  return static_cast<double>(differ) / static_cast<double>(attributes.size()) +
         (y != y_hat ? label_flip_cost : 0.0);
}

OppObjective opp_evaluate(const OppMap& map, const Matrix& transition) {
  Problem prob{map, Matrix(transition.rows(), transition.cols()), IntVector(transition.rows())};
  for (Index r = 0; r < transition.rows(); ++r) {
    const Index cell = map.source_cells[r];
    prob.row_group[r] = static_cast<int>(cell % 2);
    const Index x = cell / 4;
    const int y = static_cast<int>((cell / 2) % 2);
    for (Index c = 0; c < transition.cols(); ++c)
      prob.delta(r, c) = map.distortion(x, y, c / 2, static_cast<int>(c % 2));
  }
  return prob.evaluate(transition).parts;
}

OppMap opp_fit(const TabularDataset& ds, const OppConfig& cfg) {
  ds.validate();
  if (!(cfg.epsilon > 0.0)) throw Error("opp: epsilon must be positive");
  if (!(cfg.distortion_budget >= 0.0)) throw Error("opp: distortion budget must be non-negative");
  if (cfg.bins < 1) throw Error("opp: bins must be at least 1");
  if (cfg.max_iter < 1) throw Error("opp: max_iter must be positive");

  OppMap map;
  map.attributes = build_attributes(ds, cfg);
  map.epsilon = cfg.epsilon;
  map.distortion_budget = cfg.distortion_budget;
  map.label_flip_cost = cfg.label_flip_cost;
  double domain = 1.0;
  for (const auto& a : map.attributes) domain *= a.cardinality();
  if (domain * 2.0 > kMaxCells)
    throw Error("opp: discretized domain has " + std::to_string(static_cast<long long>(domain * 2.0)) +
                " cells (limit 10000); restrict 'columns' or lower 'bins'");
  map.domain_size = static_cast<Index>(domain);
  const Index C = map.domain_size * 2;

  // Training mass per (x, y, s) cell.
  std::map<Index, double> mass;
  std::vector<double> xs_mass(static_cast<std::size_t>(map.domain_size * 2), 0.0);
  std::vector<double> xs_pos(xs_mass.size(), 0.0);
  std::array<double, 2> group_pos{}, group_tot{};
  const double total = ds.weights.sum();
  for (Index i = 0; i < ds.size(); ++i) {
    const Index x = map.encode_features(ds.features.row(i));
    const int y = ds.labels[i];
    const int s = ds.sensitive[i];
    const double w = ds.weights[i] / total;
    mass[(x * 2 + y) * 2 + s] += w;
    xs_mass[x * 2 + s] += w;
    if (y == 1) xs_pos[x * 2 + s] += w;
    group_tot[s] += w;
    if (y == 1) group_pos[s] += w;
  }
  if (group_tot[0] == 0.0 || group_tot[1] == 0.0) throw DataError("opp: both groups must be present");
  map.group_mass = group_tot;
  for (int s = 0; s < 2; ++s) map.group_label_rate[s] = group_pos[s] / group_tot[s];
  map.target_rate = group_pos[0] + group_pos[1];
  if (map.target_rate <= 0.0 || map.target_rate >= 1.0) throw DataError("opp: labels must take both values");
  map.label_given_xs.resize(static_cast<Index>(xs_mass.size()));
  for (std::size_t k = 0; k < xs_mass.size(); ++k)
    map.label_given_xs[static_cast<Index>(k)] =
        xs_mass[k] > 0.0 ? xs_pos[k] / xs_mass[k] : std::numeric_limits<double>::quiet_NaN();

  for (const auto& [cell, m] : mass)
    if (m > 0.0) map.source_cells.push_back(cell);
  const Index R = static_cast<Index>(map.source_cells.size());
  map.source_mass.resize(R);
  map.reference = Vector::Constant(C, kReferenceSmoothing / static_cast<double>(C));
  for (Index r = 0; r < R; ++r) {
    const Index cell = map.source_cells[r];
    map.source_mass[r] = mass[cell];
    map.reference[cell / 2] += (1.0 - kReferenceSmoothing) * mass[cell];
  }

  Problem prob{map, Matrix(R, C), IntVector(R)};
  Matrix t = Matrix::Constant(R, C, kInteriorMix / static_cast<double>(C));
  for (Index r = 0; r < R; ++r) {
    const Index cell = map.source_cells[r];
    prob.row_group[r] = static_cast<int>(cell % 2);
    const Index x = cell / 4;
    const int y = static_cast<int>((cell / 2) % 2);
    for (Index c = 0; c < C; ++c) prob.delta(r, c) = map.distortion(x, y, c / 2, static_cast<int>(c % 2));
    t(r, cell / 2) += 1.0 - kInteriorMix;
  }

  for (double rho = cfg.penalty_start; rho <= cfg.penalty_max * (1.0 + 1e-12); rho *= cfg.penalty_growth) {
    map.stage_starts.push_back(map.trace.size());
    Evaluation ev = prob.evaluate(t);
    double obj = ev.parts.penalized(rho);
    map.trace.push_back(obj);
    double step = 1.0;
    for (int it = 0; it < cfg.max_iter; ++it) {
      const Matrix g = prob.gradient(t, ev, rho);
      bool accepted = false;
      Matrix cand;
      Evaluation cand_ev;
      double cand_obj = obj;
      for (int halving = 0; halving < 60; ++halving) {
        // Exponentiated-gradient step per conditional row; the row gradient
        // is divided by the row's mass so rare cells move at the same pace.
        cand.resize(R, C);
        for (Index r = 0; r < R; ++r) {
          const Eigen::RowVectorXd d = g.row(r) / map.source_mass[r];
          const Eigen::RowVectorXd e = (-step * (d.array() - d.minCoeff())).exp();
          cand.row(r) = t.row(r).cwiseProduct(e);
          cand.row(r) /= cand.row(r).sum();
        }
        cand_ev = prob.evaluate(cand);
        cand_obj = cand_ev.parts.penalized(rho);
        if (std::isfinite(cand_obj) && cand_obj <= obj + kArmijo * g.cwiseProduct(cand - t).sum()) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      const double decrease = obj - cand_obj;
      t = std::move(cand);
      ev = std::move(cand_ev);
      obj = cand_obj;
      map.trace.push_back(obj);
      if (cfg.on_iterate) cfg.on_iterate(t);
      step *= 2.0;
      if (decrease <= 1e-12 * std::max(std::abs(obj), 1.0)) break;
    }
    if (ev.parts.fairness == 0.0 && ev.parts.distortion == 0.0 && rho > cfg.penalty_start) break;
  }

  map.transition = std::move(t);
  const Evaluation final_ev = prob.evaluate(map.transition);
  for (int s = 0; s < 2; ++s)
    map.fairness_residual = std::max(map.fairness_residual,
                                     std::abs(final_ev.parts.group_rates[s] / map.target_rate - 1.0) - map.epsilon);
  map.fairness_residual = std::max(map.fairness_residual, 0.0);
  map.distortion_residual =
      std::max((final_ev.row_distortion.array() - map.distortion_budget).maxCoeff(), 0.0);
  if (map.fairness_residual > 1e-3 || map.distortion_residual > 1e-3)
    warn("opp: constraints not met (fairness residual " + std::to_string(map.fairness_residual) +
         ", distortion residual " + std::to_string(map.distortion_residual) + ")");
  return map;
}

namespace {

void write_cell(const OppMap& map, Index x_hat, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  const auto d = digits_of(map.attributes, x_hat);
  for (std::size_t a = 0; a < map.attributes.size(); ++a) {
    const auto& attr = map.attributes[a];
    if (attr.kind == FeatureKind::Numeric) {
      row[attr.feature_columns.front()] = attr.bin_medians[static_cast<std::size_t>(d[a])];
    } else {
      for (std::size_t k = 0; k < attr.feature_columns.size(); ++k)
        row[attr.feature_columns[k]] = static_cast<int>(k) == d[a] ? 1.0 : 0.0;
    }
  }
}

void report_clamped(std::size_t clamped) {
  if (clamped > 0)
    warn("opp: " + std::to_string(clamped) + " record(s) outside the fitted bins were clamped");
}

}  // namespace

TabularDataset opp_transform(const OppMap& map, const TabularDataset& ds, std::uint64_t seed,
                             bool transform_labels) {
  TabularDataset out = ds;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::size_t clamped = 0;
  for (Index i = 0; i < ds.size(); ++i) {
    bool c = false;
    const Index x = map.encode_features(ds.features.row(i), &c);
    clamped += c;
    const int y = ds.labels[i];
    const int s = ds.sensitive[i];
    Vector dist;
    if (transform_labels) {
      dist = map.row_for(x, y, s);
    } else {
      double p = map.label_given_xs[x * 2 + s];
      if (std::isnan(p)) p = map.group_label_rate[s];
      dist = p * map.row_for(x, 1, s) + (1.0 - p) * map.row_for(x, 0, s);
    }
    const double u = unif(rng) * dist.sum();
    Index pick = dist.size() - 1;
    double acc = 0.0;
    for (Index k = 0; k < dist.size(); ++k) {
      acc += dist[k];
      if (u < acc) {
        pick = k;
        break;
      }
    }
    write_cell(map, pick / 2, out.features.row(i));
    if (transform_labels) out.labels[i] = static_cast<int>(pick % 2);
  }
  report_clamped(clamped);
  out.provenance = extend_provenance(ds.provenance, "OPP");
  return out;
}

TabularDataset opp_discretize(const OppMap& map, const TabularDataset& ds) {
  TabularDataset out = ds;
  std::size_t clamped = 0;
  for (Index i = 0; i < ds.size(); ++i) {
    bool c = false;
    const Index x = map.encode_features(ds.features.row(i), &c);
    clamped += c;
    write_cell(map, x, out.features.row(i));
  }
  report_clamped(clamped);
  return out;
}

}  // namespace fairbench
