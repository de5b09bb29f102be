#include <doctest.h>

#include <random>

#include "roadwork/linear.hpp"

using namespace roadwork;

namespace {

struct Synthetic {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// y = 2 + 3 x0 - 1.5 x1 + noise, noise uniform on [-spread, spread].
Synthetic synthetic(int n, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 2.0);
  std::uniform_real_distribution<double> u(-spread, spread);
  Synthetic s{Eigen::MatrixXd(n, 2), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    s.x(i, 0) = z(rng) + 4.0;
    s.x(i, 1) = z(rng);
    s.y(i) = 2.0 + 3.0 * s.x(i, 0) - 1.5 * s.x(i, 1) + (spread > 0 ? u(rng) : 0.0);
  }
  return s;
}

}  // namespace

TEST_CASE("standardizer") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 7, 2, 7, 3, 7, 4, 7;
  const auto st = Standardizer::fit(x);
  CHECK(st.mean(0) == doctest::Approx(2.5));
  CHECK(st.scale(1) == 1.0);
  const Eigen::MatrixXd z = st.apply(x);
  CHECK(z.col(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((z.col(0).array().square().mean()) == doctest::Approx(1.0));
  CHECK(z.col(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("OLS recovers exact coefficients") {
  const auto s = synthetic(200, 0.0, 1);
  const auto m = fit_ols(s.x, s.y);
  CHECK(m.raw_intercept() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(m.raw_weights()(0) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(m.raw_weights()(1) == doctest::Approx(-1.5).epsilon(1e-6));
  CHECK((m.predict(s.x) - s.y).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("OLS survives duplicated columns") {
  auto s = synthetic(100, 0.1, 2);
  Eigen::MatrixXd x(s.x.rows(), 3);
  x << s.x, s.x.col(0);
  const auto m = fit_ols(x, s.y);
  CHECK(m.predict(x).allFinite());
  CHECK((m.predict(x) - s.y).cwiseAbs().maxCoeff() < 0.2);
}

TEST_CASE("quantile regression covers the requested fraction") {
  const auto s = synthetic(2000, 1.0, 3);
  for (double tau : {0.1, 0.5, 0.9}) {
    QuantileFitOptions opts;
    opts.tau = tau;
    const auto res = fit_quantile_linear(s.x, s.y, opts);
    const Eigen::VectorXd pred = res.model.predict(s.x);
    double below = 0.0;
    for (Eigen::Index i = 0; i < s.y.size(); ++i) below += s.y(i) <= pred(i) ? 1.0 : 0.0;
    CHECK(below / static_cast<double>(s.y.size()) == doctest::Approx(tau).epsilon(0.05 / tau));
    // True conditional quantile has intercept 2 - 1 + 2 tau.
    CHECK(res.model.raw_intercept() == doctest::Approx(1.0 + 2.0 * tau).epsilon(0.15));
    for (std::size_t e = 1; e < res.loss_trace.size(); ++e) CHECK(res.loss_trace[e] <= res.loss_trace[e - 1]);
    CHECK(res.epochs >= 1);
  }
}

TEST_CASE("Bayesian ridge approaches OLS with plenty of data") {
  const auto s = synthetic(1000, 0.5, 4);
  const auto ols = fit_ols(s.x, s.y);
  const auto bayes = fit_bayes_ridge(s.x, s.y);
  CHECK(bayes.iterations >= 1);
  CHECK(bayes.alpha > 0);
  CHECK(bayes.lambda > 0);
  CHECK((bayes.predict(s.x) - ols.predict(s.x)).cwiseAbs().maxCoeff() < 1e-2);
  // Residual variance of uniform noise on [-0.5, 0.5] is 1/12.
  CHECK(1.0 / bayes.alpha == doctest::Approx(1.0 / 12.0).epsilon(0.15));
  const Eigen::VectorXd sd = bayes.predictive_std(s.x);
  for (Eigen::Index i = 0; i < sd.size(); ++i) CHECK(sd(i) >= std::sqrt(1.0 / bayes.alpha));
}

TEST_CASE("Bayesian ridge without evidence updates keeps its initial precisions") {
  const auto s = synthetic(50, 0.5, 5);
  BayesRidgeOptions opts;
  opts.maximize_evidence = false;
  opts.alpha_init = 3.0;
  opts.lambda_init = 2.0;
  const auto m = fit_bayes_ridge(s.x, s.y, opts);
  CHECK(m.alpha == 3.0);
  CHECK(m.lambda == 2.0);
}

TEST_CASE("Bayesian ridge with a vanishing prior and fixed noise is OLS") {
  const auto s = synthetic(400, 0.5, 6);
  BayesRidgeOptions opts;
  opts.maximize_evidence = false;
  opts.alpha_init = 1.0;
  opts.lambda_init = 1e-12;
  const auto bayes = fit_bayes_ridge(s.x, s.y, opts);
  const auto ols = fit_ols(s.x, s.y, 0.0);
  CHECK(bayes.intercept == doctest::Approx(ols.intercept).epsilon(1e-10));
  for (Eigen::Index i = 0; i < 2; ++i) CHECK(std::abs(bayes.weights(i) - ols.weights(i)) < 1e-4);
}
