#pragma once

#include "fairbench/dataset.hpp"
#include "fairbench/params.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fairbench {

struct LogRegConfig {
  double l2 = 1e-4;
  int max_iter = 5000;
  double tol = 1e-6;
  bool standardize = true;
  std::uint64_t seed = 0;  // unused by the deterministic solver; kept for adapters
};

struct TrainedModel {
  Vector coefficients;
  double intercept = 0.0;
  /// Weighted training mean and scale per feature (0 and 1 when not standardizing).
  Vector mean;
  Vector scale;
  double loss = 0.0;
  double gradient_norm = 0.0;  // max-norm at the returned parameters
  int iterations = 0;
};

/// Regularized weighted log-loss at theta = (beta, intercept) on already
/// standardized features. Writes the gradient when `grad` is non-null.
double logreg_objective(const Matrix& x, const Eigen::Ref<const IntVector>& y,
                        const Eigen::Ref<const Vector>& w, double l2, const Vector& theta,
                        Vector* grad = nullptr);

/// Weighted mean and population standard deviation (zero spread maps to 1).
std::pair<Vector, Vector> weighted_standardization(const Matrix& x, const Vector& w);

/// Damped Newton iterations with Armijo backtracking, starting from
/// `initial` (zeros if empty).
TrainedModel train_logreg(const TabularDataset& train, const LogRegConfig& cfg,
                          const std::optional<Vector>& initial = std::nullopt);

/// sigma(beta . x_std + b); values in (0, 1).
Vector predict_scores(const TrainedModel& model, const TabularDataset& ds);

LogRegConfig logreg_config_from(const Params& params);

/// Extension point: anything that fits on weighted data and emits scores in [0, 1].
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string name() const = 0;
  virtual void fit(const TabularDataset& train) = 0;
  virtual Vector score(const TabularDataset& ds) const = 0;
};

using ClassifierFactory = std::function<std::unique_ptr<Classifier>(const Params&)>;

/// Registers a classifier under `name`, replacing any previous entry.
/// "logreg" is registered by default.
void register_classifier(const std::string& name, ClassifierFactory factory);
std::unique_ptr<Classifier> make_classifier(const std::string& name, const Params& params);
std::vector<std::string> registered_classifiers();

}  // namespace fairbench
