#include "fairbench/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace fairbench {
namespace {

constexpr double kArmijo = 1e-4;

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Matrix standardized(const Matrix& x, const Vector& mean, const Vector& scale) {
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

}  // namespace

double logreg_objective(const Matrix& x, const Eigen::Ref<const IntVector>& y,
                        const Eigen::Ref<const Vector>& w, double l2, const Vector& theta, Vector* grad) {
  const Index d = x.cols();
  if (theta.size() != d + 1) throw Error("logreg: parameter vector has the wrong length");
  const double total = w.sum();
  const auto beta = theta.head(d);
  const Vector z = (x * beta).array() + theta[d];
  double loss = 0.0;
  Vector resid(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    loss += w[i] * (softplus(z[i]) - y[i] * z[i]);
    resid[i] = w[i] * (sigmoid(z[i]) - y[i]);
  }
  loss = loss / total + 0.5 * l2 * beta.squaredNorm();
  if (grad) {
    grad->resize(d + 1);
    grad->head(d) = x.transpose() * resid / total + l2 * beta;
    (*grad)[d] = resid.sum() / total;
  }
  return loss;
}

std::pair<Vector, Vector> weighted_standardization(const Matrix& x, const Vector& w) {
  const double total = w.sum();
  Vector mean = (x.transpose() * w) / total;
  Vector scale(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double var = (w.array() * (x.col(j).array() - mean[j]).square()).sum() / total;
    scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return {std::move(mean), std::move(scale)};
}

TrainedModel train_logreg(const TabularDataset& train, const LogRegConfig& cfg,
                          const std::optional<Vector>& initial) {
  train.validate();
  if (!(cfg.tol > 0.0)) throw Error("logreg: tolerance must be positive");
  if (cfg.l2 < 0.0) throw Error("logreg: L2 strength must be non-negative");
  const Index pos = train.labels.sum();
  if (pos == 0 || pos == train.size()) throw DataError("logreg: training labels contain a single class");

  TrainedModel model;
  const Index d = train.dims();
  if (cfg.standardize) {
    std::tie(model.mean, model.scale) = weighted_standardization(train.features, train.weights);
  } else {
    model.mean = Vector::Zero(d);
    model.scale = Vector::Ones(d);
  }
  const Matrix x = standardized(train.features, model.mean, model.scale);

  Vector theta = initial ? *initial : Vector::Zero(d + 1);
  if (theta.size() != d + 1) throw Error("logreg: initial parameters have the wrong length");
  Vector g;
  double f = logreg_objective(x, train.labels, train.weights, cfg.l2, theta, &g);
  if (!std::isfinite(f)) throw NumericalError("logreg: non-finite initial loss");

  // Augmented design [x 1] so the intercept is the last coordinate.
  Matrix xa(x.rows(), d + 1);
  xa << x, Vector::Ones(x.rows());
  const double total = train.weights.sum();
  Vector reg = Vector::Constant(d + 1, cfg.l2);
  reg[d] = 0.0;

  int it = 0;
  for (; it < cfg.max_iter && g.lpNorm<Eigen::Infinity>() > cfg.tol; ++it) {
    const Vector z = xa * theta;
    const Vector curv = train.weights.cwiseProduct(z.unaryExpr([](double v) {
      const double p = sigmoid(v);
      return p * (1.0 - p);
    })) / total;
    Matrix h = xa.transpose() * curv.asDiagonal() * xa;
    // A tiny ridge keeps the system solvable when a feature is constant.
    h.diagonal() += reg + Vector::Constant(d + 1, 1e-12);
    const Vector dir = -h.ldlt().solve(g);
    const double slope = g.dot(dir);
    if (!(slope < 0.0)) break;

    const double gnorm = g.lpNorm<Eigen::Infinity>();
    double step = 1.0;
    Vector cand, cand_g;
    double fc = f;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      cand = theta + step * dir;
      fc = logreg_objective(x, train.labels, train.weights, cfg.l2, cand, &cand_g);
      // Near the optimum the loss stops resolving the decrease; a full step
      // that shrinks the gradient is then taken on its own merit.
      if (std::isfinite(fc) &&
          (fc <= f + kArmijo * step * slope || (halving == 0 && cand_g.lpNorm<Eigen::Infinity>() < gnorm))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    theta = std::move(cand);
    g = std::move(cand_g);
    f = fc;
  }
  model.coefficients = theta.head(d);
  model.intercept = theta[d];
  model.loss = f;
  model.gradient_norm = g.lpNorm<Eigen::Infinity>();
  model.iterations = it;
  return model;
}

Vector predict_scores(const TrainedModel& model, const TabularDataset& ds) {
  if (ds.dims() != model.coefficients.size())
    throw Error("logreg: dataset has " + std::to_string(ds.dims()) + " features, model expects " +
                std::to_string(model.coefficients.size()));
  const Vector z = (standardized(ds.features, model.mean, model.scale) * model.coefficients).array() +
                   model.intercept;
  return z.unaryExpr(&sigmoid);
}

LogRegConfig logreg_config_from(const Params& params) {
  params.require_known({"l2", "max_iter", "tol", "standardize", "seed"}, "logreg");
  LogRegConfig cfg;
  cfg.l2 = params.get_double("l2", cfg.l2);
  cfg.max_iter = static_cast<int>(params.get_int("max_iter", cfg.max_iter));
  cfg.tol = params.get_double("tol", cfg.tol);
  cfg.standardize = params.get_bool("standardize", cfg.standardize);
  cfg.seed = params.get_uint("seed", cfg.seed);
  return cfg;
}

namespace {

class LogisticRegression final : public Classifier {
 public:
  explicit LogisticRegression(LogRegConfig cfg) : cfg_(cfg) {}
  std::string name() const override { return "logreg"; }
  void fit(const TabularDataset& train) override { model_ = train_logreg(train, cfg_); }
  Vector score(const TabularDataset& ds) const override {
    if (!model_) throw Error("logreg: score called before fit");
    return predict_scores(*model_, ds);
  }

 private:
  LogRegConfig cfg_;
  std::optional<TrainedModel> model_;
};

struct Registry {
  std::mutex mutex;
  std::map<std::string, ClassifierFactory> factories{
      {"logreg", [](const Params& p) -> std::unique_ptr<Classifier> {
         return std::make_unique<LogisticRegression>(logreg_config_from(p));
       }}};
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_classifier(const std::string& name, ClassifierFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.factories[name] = std::move(factory);
}

std::unique_ptr<Classifier> make_classifier(const std::string& name, const Params& params) {
  auto& r = registry();
  ClassifierFactory factory;
  {
    std::lock_guard lock(r.mutex);
    const auto it = r.factories.find(name);
    if (it == r.factories.end()) throw Error("unknown model '" + name + "'");
    factory = it->second;
  }
  return factory(params);
}

std::vector<std::string> registered_classifiers() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, f] : r.factories) names.push_back(name);
  return names;
}

}  // namespace fairbench
