#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "roadwork/features.hpp"
#include "roadwork/linear.hpp"
#include "roadwork/trees.hpp"

namespace roadwork {

// Closed set of regression surrogates.
enum class ModelKind { log_ols, log_quantile, log_bayes_ridge, log_bagging, log_knn, random_forest, gbt };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
bool is_log_kind(ModelKind kind);
// Kinds trained on the pinball loss at a fixed quantile.
bool is_pinball_kind(ModelKind kind);
bool is_ensemble_kind(ModelKind kind);

using Hyperparameters = std::map<std::string, double>;

/// Documented defaults:
///   log_ols          jitter=1e-8
///   log_quantile     learning_rate=0.5 max_epochs=5000 patience=50 min_improvement=1e-9
///   log_bayes_ridge  max_iter=300 tol=1e-6 alpha_1=alpha_2=lambda_1=lambda_2=1e-6
///                    alpha_init=0 (1/var y) lambda_init=0 (1) evidence=1
///   log_bagging      members=50 sample_fraction=1.0 (with replacement) jitter=1e-8
///   log_knn          k=10
///   random_forest    trees=100 depth=12 min_leaf=5 max_features=0 (ceil(sqrt(p)))
///   gbt              trees=300 depth=4 learning_rate=0.1 min_leaf=5
Hyperparameters default_hyperparameters(ModelKind kind);

struct ModelSpec {
  ModelKind kind = ModelKind::log_ols;
  double tau = 0.05;
  Hyperparameters hyperparameters;  // overrides on top of the defaults
  std::uint64_t seed = 0;
  int threads = 1;
};

// Defaults overlaid with the ModelSpec overrides; unknown keys and bad values throw.
Hyperparameters resolve_hyperparameters(const ModelSpec& spec);

double pinball_loss(double y, double y_hat, double tau);

/// Quantile with linear interpolation between order statistics (position (n-1) tau).
double empirical_quantile(std::vector<double> values, double tau);

double standard_normal_quantile(double p);

struct LinearParams {
  LinearModel model;
};
struct BaggingParams {
  std::vector<LinearModel> members;
};
struct BayesParams {
  BayesRidgeModel model;
};
struct KnnParams {
  Standardizer standardizer;
  Eigen::MatrixXd points;  // standardized training rows
  Eigen::VectorXd targets; // log targets
  int k = 10;
};
struct ForestParams {
  std::vector<RegressionTree> trees;
};
struct GbtParams {
  double init = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  std::vector<double> training_loss;  // mean pinball loss after each round
};

using ModelParams = std::variant<LinearParams, BaggingParams, BayesParams, KnnParams, ForestParams, GbtParams>;

struct TrainedModel {
  ModelKind kind = ModelKind::log_ols;
  double tau = 0.05;
  std::vector<std::string> schema;
  std::size_t training_rows = 0;
  bool log_target = true;
  Hyperparameters hyperparameters;
  ModelParams params;
};

TrainedModel fit(const ModelSpec& spec, const FeatureMatrix& x, std::span<const double> y);

/// Point predictions on the TTT scale.
std::vector<double> predict(const TrainedModel& model, const FeatureMatrix& x);

/// Per-row member predictions on the TTT scale for ensemble kinds
/// (bagging members, kNN neighbours, forest trees).
std::vector<std::vector<double>> member_predictions(const TrainedModel& model, const FeatureMatrix& x);

struct ConservativePrediction {
  std::vector<double> values;
  bool has_mechanism = true;  // false for log_ols, which falls back to the point prediction
};

ConservativePrediction predict_conservative(const TrainedModel& model, const FeatureMatrix& x, double tau);

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

}  // namespace roadwork
