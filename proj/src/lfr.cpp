#include "fairbench/preproc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fairbench {
namespace {

constexpr double kClamp = 1e-6;

Matrix squared_distances(const Matrix& prototypes, const Matrix& x) {
  Matrix d(x.rows(), prototypes.rows());
  for (Index k = 0; k < prototypes.rows(); ++k)
    d.col(k) = (x.rowwise() - prototypes.row(k)).rowwise().squaredNorm();
  return d;
}

}  // namespace

Matrix lfr_memberships(const Matrix& prototypes, const Matrix& x) {
  if (prototypes.cols() != x.cols()) throw Error("lfr: prototype dimension mismatch");
  Matrix logits = -squared_distances(prototypes, x);
  for (Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    logits.row(i) = (logits.row(i).array() - top).exp();
    logits.row(i) /= logits.row(i).sum();
  }
  return logits;
}

LfrLoss lfr_objective(const LfrParams& params, const Matrix& x, const Eigen::Ref<const IntVector>& y,
                      const Eigen::Ref<const IntVector>& s, const LfrConfig& cfg, LfrParams* grad) {
  const Index n = x.rows();
  const Index K = params.prototypes.rows();
  const double nd = static_cast<double>(n);
  const double n1 = static_cast<double>(s.sum());
  const double n0 = nd - n1;
  if (n0 == 0.0 || n1 == 0.0) throw DataError("lfr: both groups must be present");

  const Matrix m = lfr_memberships(params.prototypes, x);

  Eigen::RowVectorXd gap = Eigen::RowVectorXd::Zero(K);  // mean_{S=1} - mean_{S=0}
  for (Index i = 0; i < n; ++i) gap += m.row(i) * (s[i] == 1 ? 1.0 / n1 : -1.0 / n0);

  const Matrix residual = x - m * params.prototypes;
  const Vector raw_pred = m * params.label_weights;

  LfrLoss loss;
  loss.fairness = gap.cwiseAbs().sum();
  loss.reconstruction = residual.squaredNorm() / nd;
  Vector dpred(n);
  double nll = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double p = std::clamp(raw_pred[i], kClamp, 1.0 - kClamp);
    nll -= y[i] == 1 ? std::log(p) : std::log(1.0 - p);
    const bool clamped = raw_pred[i] < kClamp || raw_pred[i] > 1.0 - kClamp;
    dpred[i] = clamped ? 0.0 : -(y[i] == 1 ? 1.0 / p : -1.0 / (1.0 - p)) / nd;
  }
  loss.prediction = nll / nd;
  loss.total = cfg.a_z * loss.fairness + cfg.a_x * loss.reconstruction + cfg.a_y * loss.prediction;
  if (!grad) return loss;

  // dL/dM
  const Eigen::RowVectorXd gap_sign = gap.unaryExpr([](double v) {
    return static_cast<double>((v > 0.0) - (v < 0.0));
  });
  const Matrix dxhat = (-2.0 * cfg.a_x / nd) * residual;
  Matrix g = dxhat * params.prototypes.transpose();
  g += (cfg.a_y * dpred) * params.label_weights.transpose();
  for (Index i = 0; i < n; ++i) g.row(i) += cfg.a_z * gap_sign * (s[i] == 1 ? 1.0 / n1 : -1.0 / n0);

  // Softmax backward: dL/dlogit = M .* (G - rowsum(M .* G)).
  const Vector inner = (m.array() * g.array()).rowwise().sum();
  const Matrix dlogit = m.array() * (g.colwise() - inner).array();

  // logit_ik = -|x_i - v_k|^2, so dlogit_ik/dv_k = 2 (x_i - v_k).
  grad->prototypes = m.transpose() * dxhat;
  grad->prototypes += 2.0 * (dlogit.transpose() * x);
  grad->prototypes -= 2.0 * (dlogit.colwise().sum().transpose().asDiagonal() * params.prototypes);
  grad->label_weights = cfg.a_y * (m.transpose() * dpred);
  return loss;
}

LfrModel lfr_fit(const TabularDataset& ds, const LfrConfig& cfg) {
  ds.validate();
  const Index n = ds.size();
  const Index K = cfg.prototypes;
  if (K < 2) throw Error("lfr: need at least 2 prototypes");
  if (K >= n) throw Error("lfr: prototype count must be below the number of records");
  if (cfg.a_z <= 0.0 || cfg.a_x <= 0.0 || cfg.a_y <= 0.0)
    throw Error("lfr: objective weights must be positive");

  LfrModel model;
  model.config = cfg;
  model.mean = ds.features.colwise().mean().transpose();
  model.scale.resize(ds.dims());
  for (Index j = 0; j < ds.dims(); ++j) {
    const double var = (ds.features.col(j).array() - model.mean[j]).square().mean();
    model.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  const Matrix x = (ds.features.rowwise() - model.mean.transpose()).array().rowwise() /
                   model.scale.transpose().array();

  std::mt19937_64 rng(cfg.seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LfrParams p;
  p.prototypes.resize(K, ds.dims());
  p.label_weights.resize(K);
  for (Index k = 0; k < K; ++k) {
    p.prototypes.row(k) = x.row(order[k]);
    p.label_weights[k] = unif(rng);
  }

  LfrParams g;
  LfrLoss loss = lfr_objective(p, x, ds.labels, ds.sensitive, cfg, &g);
  if (!std::isfinite(loss.total)) throw NumericalError("lfr: non-finite initial objective");
  model.trace.push_back(loss.total);
  double step = 1.0;
  for (int it = 0; it < cfg.max_iter; ++it) {
    bool accepted = false;
    LfrParams cand;
    LfrLoss cand_loss;
    for (int halving = 0; halving < 60; ++halving) {
      cand.prototypes = p.prototypes - step * g.prototypes;
      cand.label_weights = (p.label_weights - step * g.label_weights).cwiseMax(0.0).cwiseMin(1.0);
      cand_loss = lfr_objective(cand, x, ds.labels, ds.sensitive, cfg);
      if (!std::isfinite(cand_loss.total)) {
        step *= 0.5;
        continue;
      }
      const double dv = (cand.prototypes - p.prototypes).cwiseProduct(g.prototypes).sum() +
                        (cand.label_weights - p.label_weights).dot(g.label_weights);
      const double sq = (cand.prototypes - p.prototypes).squaredNorm() +
                        (cand.label_weights - p.label_weights).squaredNorm();
      if (cand_loss.total <= loss.total + dv + sq / (2.0 * step) && cand_loss.total <= loss.total) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double decrease = loss.total - cand_loss.total;
    p = std::move(cand);
    loss = lfr_objective(p, x, ds.labels, ds.sensitive, cfg, &g);
    if (!std::isfinite(loss.total)) throw NumericalError("lfr: non-finite objective during descent");
    model.trace.push_back(loss.total);
    model.iterations = it + 1;
    step *= 2.0;
    if (decrease / std::max(std::abs(model.trace[model.trace.size() - 2]), 1e-12) < cfg.tol) break;
  }
  model.params = std::move(p);
  return model;
}

TabularDataset lfr_transform(const LfrModel& model, const TabularDataset& ds, bool replace_labels) {
  if (ds.dims() != model.params.prototypes.cols())
    throw Error("lfr: dataset has " + std::to_string(ds.dims()) + " features, model expects " +
                std::to_string(model.params.prototypes.cols()));
  const Matrix x = (ds.features.rowwise() - model.mean.transpose()).array().rowwise() /
                   model.scale.transpose().array();
  const Matrix m = lfr_memberships(model.params.prototypes, x);
  TabularDataset out = ds;
  out.features = ((m * model.params.prototypes).array().rowwise() * model.scale.transpose().array())
                     .rowwise() +
                 model.mean.transpose().array();
  if (replace_labels) {
    const Vector pred = m * model.params.label_weights;
    out.labels = (pred.array() >= 0.5).cast<int>();
  }
  out.provenance = extend_provenance(ds.provenance, "LFR");
  return out;
}

}  // namespace fairbench
