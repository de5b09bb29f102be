#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "roadwork/errors.hpp"
#include "roadwork/surrogates.hpp"

using namespace roadwork;

namespace {

const std::vector<ModelKind> kAllKinds{ModelKind::log_ols,     ModelKind::log_quantile, ModelKind::log_bayes_ridge,
                                       ModelKind::log_bagging, ModelKind::log_knn,      ModelKind::random_forest,
                                       ModelKind::gbt};

struct Data {
  FeatureMatrix x;
  std::vector<double> y;
};

// Positive targets: y = exp(1 + 0.5 x0 - 0.3 x1 + noise) * 100.
Data synthetic(std::size_t n, std::uint64_t seed, double noise = 0.2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Data d{FeatureMatrix({"x0", "x1", "x2"}, n), std::vector<double>(n)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < 3; ++c) d.x.at(r, c) = z(rng);
    d.y[r] = 100.0 * std::exp(1.0 + 0.5 * d.x.at(r, 0) - 0.3 * d.x.at(r, 1) + noise * z(rng));
  }
  return d;
}

ModelSpec plain(ModelKind kind, double tau = 0.05) {
  ModelSpec s;
  s.kind = kind;
  s.tau = tau;
  return s;
}

ModelSpec spec_of(ModelKind kind, double tau = 0.05) {
  ModelSpec s;
  s.kind = kind;
  s.tau = tau;
  s.seed = 7;
  if (kind == ModelKind::random_forest) s.hyperparameters = {{"trees", 20}};
  if (kind == ModelKind::gbt) s.hyperparameters = {{"trees", 40}};
  if (kind == ModelKind::log_bagging) s.hyperparameters = {{"members", 15}};
  return s;
}

LinearModel constant_member(double log_value) {
  LinearModel m;
  m.standardizer.mean = Eigen::VectorXd::Zero(1);
  m.standardizer.scale = Eigen::VectorXd::Ones(1);
  m.intercept = log_value;
  m.weights = Eigen::VectorXd::Zero(1);
  return m;
}

}  // namespace

TEST_CASE("pinball loss fixtures") {
  CHECK(pinball_loss(10, 9, 0.5) == 0.5);
  CHECK(pinball_loss(10, 0, 0.95) == doctest::Approx(9.5));
  CHECK(pinball_loss(10, 10, 0.3) == 0.0);
  CHECK(pinball_loss(10, 12, 0.1) == doctest::Approx(1.8));
}

TEST_CASE("empirical quantile and normal quantile") {
  CHECK(empirical_quantile({10, 20, 30, 40}, 0.5) == 25.0);
  CHECK(empirical_quantile({40, 10, 30, 20}, 0.0) == 10.0);
  CHECK(empirical_quantile({40, 10, 30, 20}, 1.0) == 40.0);
  CHECK(empirical_quantile({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK(standard_normal_quantile(0.05) == doctest::Approx(-1.6448536).epsilon(1e-7));
  CHECK(standard_normal_quantile(0.5) == doctest::Approx(0.0));
  CHECK(standard_normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
}

TEST_CASE("model kind names and defaults") {
  for (auto k : kAllKinds) {
    CHECK(model_kind_from_string(to_string(k)) == k);
    CHECK_FALSE(default_hyperparameters(k).empty());
  }
  CHECK_THROWS_AS(model_kind_from_string("svm"), ValidationError);
  CHECK(default_hyperparameters(ModelKind::gbt).at("trees") == 300);
  CHECK(default_hyperparameters(ModelKind::log_knn).at("k") == 10);
  CHECK(is_pinball_kind(ModelKind::gbt));
  CHECK(is_pinball_kind(ModelKind::log_quantile));
  CHECK_FALSE(is_pinball_kind(ModelKind::log_ols));
  CHECK(is_ensemble_kind(ModelKind::random_forest));
  CHECK_FALSE(is_log_kind(ModelKind::random_forest));

  ModelSpec bad;
  bad.kind = ModelKind::log_knn;
  bad.hyperparameters = {{"depth", 3}};
  CHECK_THROWS_AS(resolve_hyperparameters(bad), ValidationError);
  bad.hyperparameters = {{"k", 0}};
  CHECK_THROWS_AS(resolve_hyperparameters(bad), ValidationError);
}

TEST_CASE("log OLS recovers a log-linear law") {
  FeatureMatrix x({"f"}, 50);
  std::vector<double> y(50);
  for (std::size_t r = 0; r < 50; ++r) {
    x.at(r, 0) = static_cast<double>(r) / 10.0;
    y[r] = std::exp(2.0 + 3.0 * x.at(r, 0));
  }
  const auto m = fit(plain(ModelKind::log_ols), x, y);
  const auto& lin = std::get<LinearParams>(m.params).model;
  CHECK(lin.raw_intercept() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(lin.raw_weights()(0) == doctest::Approx(3.0).epsilon(1e-6));
  const auto p = predict(m, x);
  for (std::size_t r = 0; r < 50; ++r) CHECK(p[r] == doctest::Approx(y[r]).epsilon(1e-6));
  const auto cp = predict_conservative(m, x, 0.05);
  CHECK_FALSE(cp.has_mechanism);
  CHECK(cp.values == p);
}

TEST_CASE("kNN with k=1 reproduces training targets") {
  const auto d = synthetic(80, 1);
  ModelSpec s = plain(ModelKind::log_knn);
  s.hyperparameters = {{"k", 1}};
  const auto m = fit(s, d.x, d.y);
  const auto p = predict(m, d.x);
  for (std::size_t r = 0; r < d.y.size(); ++r) CHECK(p[r] == doctest::Approx(d.y[r]).epsilon(1e-12));
}

TEST_CASE("GBT training loss strictly decreases") {
  const auto d = synthetic(500, 2);
  ModelSpec s = plain(ModelKind::gbt, 0.5);
  s.hyperparameters = {{"trees", 200}, {"depth", 3}};
  const auto m = fit(s, d.x, d.y);
  const auto& loss = std::get<GbtParams>(m.params).training_loss;
  REQUIRE(loss.size() == 200);
  int rises = 0;
  for (std::size_t i = 1; i < loss.size(); ++i) rises += loss[i] < loss[i - 1] ? 0 : 1;
  CHECK(rises == 0);
}

TEST_CASE("random forest point prediction is the mean of its trees") {
  const auto d = synthetic(120, 3);
  const auto m = fit(spec_of(ModelKind::random_forest), d.x, d.y);
  const auto p = predict(m, d.x);
  const auto members = member_predictions(m, d.x);
  for (std::size_t r = 0; r < d.y.size(); ++r) {
    REQUIRE(members[r].size() == 20);
    double mean = 0.0;
    for (double v : members[r]) mean += v;
    CHECK(p[r] == doctest::Approx(mean / 20.0).epsilon(1e-12));
  }
}

TEST_CASE("constant targets are reproduced by every kind") {
  auto d = synthetic(60, 4);
  std::fill(d.y.begin(), d.y.end(), 250.0);
  for (auto k : kAllKinds) {
    CAPTURE(to_string(k));
    const auto m = fit(spec_of(k), d.x, d.y);
    for (double v : predict(m, d.x)) CHECK(v == doctest::Approx(250.0).epsilon(1e-6));
  }
}

TEST_CASE("bagging conservative prediction interpolates member quantiles") {
  TrainedModel m;
  m.kind = ModelKind::log_bagging;
  m.schema = {"f"};
  BaggingParams bag;
  for (double v : {10.0, 20.0, 30.0, 40.0}) bag.members.push_back(constant_member(std::log(v)));
  m.params = bag;
  FeatureMatrix x({"f"}, 1);
  CHECK(predict_conservative(m, x, 0.5).values[0] == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(predict(m, x)[0] == doctest::Approx(std::exp((std::log(10.0) + std::log(20.0) + std::log(30.0) +
                                                       std::log(40.0)) / 4.0)));

  // Identical members collapse the quantile onto the point prediction.
  BaggingParams same;
  for (int i = 0; i < 5; ++i) same.members.push_back(constant_member(std::log(70.0)));
  m.params = same;
  CHECK(predict_conservative(m, x, 0.05).values[0] == doctest::Approx(predict(m, x)[0]).epsilon(1e-12));
}

TEST_CASE("Bayesian conservative prediction uses the predictive normal") {
  TrainedModel m;
  m.kind = ModelKind::log_bayes_ridge;
  m.schema = {"f"};
  BayesRidgeModel b;
  b.standardizer.mean = Eigen::VectorXd::Zero(1);
  b.standardizer.scale = Eigen::VectorXd::Ones(1);
  b.weights = Eigen::VectorXd::Zero(1);
  b.covariance = Eigen::MatrixXd::Zero(1, 1);
  b.alpha = 1.0;
  m.params = BayesParams{b};
  FeatureMatrix x({"f"}, 1);
  CHECK(predict_conservative(m, x, 0.05).values[0] == doctest::Approx(std::exp(-1.6448536)).epsilon(1e-6));
  CHECK(predict(m, x)[0] == doctest::Approx(1.0));
}

TEST_CASE("Bayesian ridge agrees with OLS on well-posed data") {
  const auto d = synthetic(800, 5, 0.05);
  const auto ols = predict(fit(plain(ModelKind::log_ols), d.x, d.y), d.x);
  const auto bayes = predict(fit(plain(ModelKind::log_bayes_ridge), d.x, d.y), d.x);
  for (std::size_t r = 0; r < d.y.size(); ++r) CHECK(std::abs(std::log(bayes[r] / ols[r])) < 1e-4);
}

TEST_CASE("ensemble quantiles commute with log at order-statistic positions") {
  const auto d = synthetic(100, 6);
  ModelSpec s = plain(ModelKind::log_bagging);
  s.hyperparameters = {{"members", 5}};
  const auto m = fit(s, d.x, d.y);
  const auto members = member_predictions(m, d.x);
  for (double tau : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto cp = predict_conservative(m, d.x, tau == 0.0 ? 1e-9 : (tau == 1.0 ? 1 - 1e-9 : tau)).values;
    for (std::size_t r = 0; r < d.y.size(); ++r) {
      std::vector<double> logs;
      for (double v : members[r]) logs.push_back(std::log(v));
      CHECK(cp[r] == doctest::Approx(std::exp(empirical_quantile(logs, tau))).epsilon(1e-6));
    }
  }
}

TEST_CASE("conservative quantiles are monotone in tau for ensembles") {
  const auto d = synthetic(200, 7);
  for (auto k : {ModelKind::log_bagging, ModelKind::log_knn, ModelKind::random_forest}) {
    const auto m = fit(spec_of(k), d.x, d.y);
    auto prev = predict_conservative(m, d.x, 0.05).values;
    for (double tau : {0.25, 0.5, 0.75, 0.95}) {
      const auto cur = predict_conservative(m, d.x, tau).values;
      for (std::size_t r = 0; r < cur.size(); ++r) CHECK(cur[r] >= prev[r]);
      prev = cur;
    }
  }
}

TEST_CASE("schema and tau mismatches are rejected") {
  const auto d = synthetic(60, 8);
  const auto m = fit(spec_of(ModelKind::gbt, 0.1), d.x, d.y);
  CHECK_NOTHROW(predict_conservative(m, d.x, 0.1));
  CHECK_THROWS_AS(predict_conservative(m, d.x, 0.2), ValidationError);
  const auto renamed = d.x.select_columns(std::vector<std::string>{"x1", "x0", "x2"});
  CHECK_THROWS_AS(predict(m, renamed), ValidationError);
  CHECK_THROWS_AS(member_predictions(m, d.x), ValidationError);

  auto neg = d.y;
  neg[3] = -1.0;
  CHECK_THROWS_AS(fit(plain(ModelKind::log_ols), d.x, neg), ValidationError);
  CHECK_THROWS_AS(fit(plain(ModelKind::log_ols), d.x.select_rows(0, 1), std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("JSON round-trip preserves predictions for every kind") {
  const auto d = synthetic(90, 9);
  for (auto k : kAllKinds) {
    CAPTURE(to_string(k));
    const auto m = fit(spec_of(k), d.x, d.y);
    const auto j = model_to_json(m);
    CHECK(j.at("kind") == "roadwork.model");
    const auto back = model_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.schema == m.schema);
    CHECK(back.training_rows == 90);
    CHECK(predict(back, d.x) == predict(m, d.x));
    CHECK(predict_conservative(back, d.x, m.tau).values == predict_conservative(m, d.x, m.tau).values);
  }
  auto j = model_to_json(fit(plain(ModelKind::log_ols), d.x, d.y));
  j["schema_version"] = 99;
  CHECK_THROWS(model_from_json(j));
}

TEST_CASE("same seed gives the same model, thread count does not matter") {
  const auto d = synthetic(150, 10);
  for (auto k : {ModelKind::log_bagging, ModelKind::random_forest, ModelKind::gbt}) {
    auto s = spec_of(k);
    const auto a = model_to_json(fit(s, d.x, d.y)).dump();
    s.threads = 4;
    CHECK(model_to_json(fit(s, d.x, d.y)).dump() == a);
    s.seed = 8;
    if (k != ModelKind::gbt) CHECK(model_to_json(fit(s, d.x, d.y)).dump() != a);
  }
}
