#include "roadwork/linear.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace roadwork {

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  const auto n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.scale = Eigen::VectorXd::Ones(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.mean(c)).square().sum() / std::max(1.0, n);
    if (var > 1e-24) s.scale(c) = std::sqrt(var);
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& x) const {
  return (standardizer.apply(x) * weights).array() + intercept;
}

double LinearModel::raw_intercept() const {
  return intercept - raw_weights().dot(standardizer.mean);
}

Eigen::VectorXd LinearModel::raw_weights() const {
  return weights.array() / standardizer.scale.array();
}

LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double jitter) {
  if (x.rows() < 1) throw std::invalid_argument("fit_ols: empty design");
  LinearModel m;
  m.standardizer = Standardizer::fit(x);
  const Eigen::MatrixXd z = m.standardizer.apply(x);
  m.intercept = y.mean();
  const Eigen::VectorXd yc = y.array() - m.intercept;
  Eigen::MatrixXd gram = z.transpose() * z;
  gram.diagonal().array() += jitter * static_cast<double>(x.rows());
  m.weights = gram.ldlt().solve(z.transpose() * yc);
  if (!m.weights.allFinite()) throw std::runtime_error("fit_ols: singular design");
  return m;
}

namespace {

// Lower tau-quantile: the smallest order statistic v with F(v) >= tau.
double lower_quantile(std::vector<double> v, double tau) {
  std::sort(v.begin(), v.end());
  auto k = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(v.size())));
  k = std::clamp<std::size_t>(k, 1, v.size());
  return v[k - 1];
}

double mean_pinball(const Eigen::VectorXd& residual, double tau) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    const double r = residual(i);
    s += r >= 0.0 ? tau * r : (tau - 1.0) * r;
  }
  return s / static_cast<double>(residual.size());
}

}  // namespace

QuantileFitResult fit_quantile_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const QuantileFitOptions& opts) {
  if (x.rows() < 1) throw std::invalid_argument("fit_quantile_linear: empty design");
  QuantileFitResult out;
  LinearModel cur;
  cur.standardizer = Standardizer::fit(x);
  const Eigen::MatrixXd z = cur.standardizer.apply(x);
  const auto n = static_cast<double>(x.rows());
  cur.intercept = lower_quantile(std::vector<double>(y.data(), y.data() + y.size()), opts.tau);
  cur.weights = Eigen::VectorXd::Zero(x.cols());

  // Step size is measured in units of the spread of y.
  const double spread = std::sqrt((y.array() - y.mean()).square().mean());
  const double eta = opts.learning_rate * (spread > 0.0 ? spread : 1.0);

  LinearModel best = cur;
  double best_loss = std::numeric_limits<double>::infinity();
  Eigen::VectorXd psi(x.rows());
  for (int epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    const Eigen::VectorXd residual = y - ((z * cur.weights).array() + cur.intercept).matrix();
    const double loss = mean_pinball(residual, opts.tau);
    if (loss < best_loss) {
      best_loss = loss;
      best = cur;
    }
    out.loss_trace.push_back(best_loss);
    out.epochs = epoch;
    const auto w = static_cast<std::size_t>(opts.patience);
    if (out.loss_trace.size() > w &&
        out.loss_trace[out.loss_trace.size() - 1 - w] - best_loss < opts.min_improvement)
      break;

    for (Eigen::Index i = 0; i < residual.size(); ++i)
      psi(i) = residual(i) > 0.0 ? opts.tau : (residual(i) < 0.0 ? opts.tau - 1.0 : 0.0);
    const double step = eta / std::sqrt(static_cast<double>(epoch));
    cur.intercept += step * psi.mean();
    cur.weights += step * (z.transpose() * psi) / n;
  }
  out.model = best;
  return out;
}

Eigen::VectorXd BayesRidgeModel::predict(const Eigen::MatrixXd& x) const {
  return (standardizer.apply(x) * weights).array() + intercept;
}

Eigen::VectorXd BayesRidgeModel::predictive_std(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd z = standardizer.apply(x);
  const Eigen::VectorXd quad = ((z * covariance).array() * z.array()).rowwise().sum();
  return (quad.array() + 1.0 / alpha).sqrt();
}

BayesRidgeModel fit_bayes_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const BayesRidgeOptions& opts) {
  if (x.rows() < 1) throw std::invalid_argument("fit_bayes_ridge: empty design");
  BayesRidgeModel m;
  m.standardizer = Standardizer::fit(x);
  const Eigen::MatrixXd z = m.standardizer.apply(x);
  const auto n = static_cast<double>(x.rows());
  m.intercept = y.mean();
  const Eigen::VectorXd yc = y.array() - m.intercept;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(z.transpose() * z);
  const Eigen::MatrixXd& v = eig.eigenvectors();
  const Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::VectorXd vty = v.transpose() * (z.transpose() * yc);

  const double var_y = yc.squaredNorm() / n;
  double alpha = opts.alpha_init > 0.0 ? opts.alpha_init : 1.0 / (var_y + 1e-12);
  double lambda = opts.lambda_init > 0.0 ? opts.lambda_init : 1.0;

  auto posterior_mean = [&](double a, double l) {
    Eigen::VectorXd d = a / (a * s.array() + l);
    return Eigen::VectorXd(v * (vty.array() * d.array()).matrix());
  };

  Eigen::VectorXd coef = posterior_mean(alpha, lambda);
  if (opts.maximize_evidence) {
    for (int it = 1; it <= opts.max_iterations; ++it) {
      m.iterations = it;
      const double rss = (yc - z * coef).squaredNorm();
      const double gamma = (alpha * s.array() / (lambda + alpha * s.array())).sum();
      lambda = (gamma + 2.0 * opts.lambda_1) / (coef.squaredNorm() + 2.0 * opts.lambda_2);
      alpha = (n - gamma + 2.0 * opts.alpha_1) / (rss + 2.0 * opts.alpha_2);
      const Eigen::VectorXd next = posterior_mean(alpha, lambda);
      const double change = (next - coef).cwiseAbs().sum();
      coef = next;
      if (change < opts.tolerance) break;
    }
  }
  m.alpha = alpha;
  m.lambda = lambda;
  m.weights = coef;
  m.covariance = v * (1.0 / (alpha * s.array() + lambda)).matrix().asDiagonal() * v.transpose();
  return m;
}

}  // namespace roadwork
