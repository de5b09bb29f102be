#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace roadwork {

/// Column-wise z-scoring fitted on training rows; zero-variance columns keep scale 1.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

/// Affine model on standardized inputs.
struct LinearModel {
  Standardizer standardizer;
  double intercept = 0.0;
  Eigen::VectorXd weights;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  // Coefficients on the original (unstandardized) feature scale.
  double raw_intercept() const;
  Eigen::VectorXd raw_weights() const;
};

/// Least squares with a ridge jitter of `jitter * n` on the standardized normal
/// equations, so rank-deficient designs still solve.
LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double jitter = 1e-8);

struct QuantileFitOptions {
  double tau = 0.05;
  double learning_rate = 0.5;
  int max_epochs = 5000;
  int patience = 50;
  double min_improvement = 1e-9;
};

struct QuantileFitResult {
  LinearModel model;
  int epochs = 0;
  std::vector<double> loss_trace;  // mean pinball loss of the best iterate so far, per epoch
};

/// Linear quantile regression by full-batch subgradient descent with step decay
/// learning_rate * sd(y) / sqrt(epoch); keeps the best iterate. Stops when the best mean loss improves
/// by less than `min_improvement` over `patience` epochs.
QuantileFitResult fit_quantile_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const QuantileFitOptions& opts);

struct BayesRidgeOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;
  // Gamma hyperpriors on the noise precision (alpha) and weight precision (lambda).
  double alpha_1 = 1e-6, alpha_2 = 1e-6, lambda_1 = 1e-6, lambda_2 = 1e-6;
  // <= 0 means 1 / var(y) for alpha and 1 for lambda.
  double alpha_init = 0.0, lambda_init = 0.0;
  bool maximize_evidence = true;
};

struct BayesRidgeModel {
  Standardizer standardizer;
  double intercept = 0.0;
  Eigen::VectorXd weights;    // posterior mean
  Eigen::MatrixXd covariance; // posterior covariance of the weights
  double alpha = 1.0;         // noise precision
  double lambda = 1.0;        // weight precision
  int iterations = 0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  // Predictive standard deviation: sqrt(1/alpha + x' S x).
  Eigen::VectorXd predictive_std(const Eigen::MatrixXd& x) const;
};

/// Bayesian ridge regression with hyperparameters set by iterative evidence
/// maximisation (MacKay updates).
BayesRidgeModel fit_bayes_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const BayesRidgeOptions& opts = {});

}  // namespace roadwork
