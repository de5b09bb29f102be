#include "roadwork/surrogates.hpp"

#include <boost/math/distributions/normal.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace roadwork {

using nlohmann::json;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::log_ols: return "log_ols";
    case ModelKind::log_quantile: return "log_quantile";
    case ModelKind::log_bayes_ridge: return "log_bayes_ridge";
    case ModelKind::log_bagging: return "log_bagging";
    case ModelKind::log_knn: return "log_knn";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::gbt: return "gbt";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  for (auto k : {ModelKind::log_ols, ModelKind::log_quantile, ModelKind::log_bayes_ridge, ModelKind::log_bagging,
                 ModelKind::log_knn, ModelKind::random_forest, ModelKind::gbt})
    if (to_string(k) == name) return k;
  throw ValidationError("unknown model kind '" + name + "'");
}

bool is_log_kind(ModelKind kind) { return kind != ModelKind::random_forest && kind != ModelKind::gbt; }

bool is_pinball_kind(ModelKind kind) { return kind == ModelKind::log_quantile || kind == ModelKind::gbt; }

bool is_ensemble_kind(ModelKind kind) {
  return kind == ModelKind::log_bagging || kind == ModelKind::log_knn || kind == ModelKind::random_forest;
}

Hyperparameters default_hyperparameters(ModelKind kind) {
  switch (kind) {
    case ModelKind::log_ols: return {{"jitter", 1e-8}};
    case ModelKind::log_quantile:
      return {{"learning_rate", 0.5}, {"max_epochs", 5000}, {"patience", 50}, {"min_improvement", 1e-9}};
    case ModelKind::log_bayes_ridge:
      return {{"max_iter", 300},   {"tol", 1e-6},       {"alpha_1", 1e-6},    {"alpha_2", 1e-6}, {"lambda_1", 1e-6},
              {"lambda_2", 1e-6}, {"alpha_init", 0.0}, {"lambda_init", 0.0}, {"evidence", 1}};
    case ModelKind::log_bagging: return {{"members", 50}, {"sample_fraction", 1.0}, {"jitter", 1e-8}};
    case ModelKind::log_knn: return {{"k", 10}};
    case ModelKind::random_forest: return {{"trees", 100}, {"depth", 12}, {"min_leaf", 5}, {"max_features", 0}};
    case ModelKind::gbt: return {{"trees", 300}, {"depth", 4}, {"learning_rate", 0.1}, {"min_leaf", 5}};
  }
  throw ValidationError("unknown model kind");
}

Hyperparameters resolve_hyperparameters(const ModelSpec& spec) {
  if (!(spec.tau > 0.0 && spec.tau < 1.0)) throw ValidationError("tau must lie in (0,1)");
  Hyperparameters h = default_hyperparameters(spec.kind);
  for (const auto& [key, value] : spec.hyperparameters) {
    if (!h.contains(key))
      throw ValidationError("unknown hyperparameter '" + key + "' for " + to_string(spec.kind));
    if (!std::isfinite(value)) throw ValidationError("hyperparameter '" + key + "' must be finite");
    h[key] = value;
  }
  auto positive_int = [&](const char* key) {
    const double v = h.at(key);
    if (v < 1 || v != std::floor(v)) throw ValidationError(std::string(key) + " must be a positive integer");
  };
  switch (spec.kind) {
    case ModelKind::log_ols:
      if (h["jitter"] < 0) throw ValidationError("jitter must be >= 0");
      break;
    case ModelKind::log_quantile:
      positive_int("max_epochs");
      positive_int("patience");
      if (!(h["learning_rate"] > 0)) throw ValidationError("learning_rate must be > 0");
      break;
    case ModelKind::log_bayes_ridge:
      positive_int("max_iter");
      if (!(h["tol"] > 0)) throw ValidationError("tol must be > 0");
      break;
    case ModelKind::log_bagging:
      positive_int("members");
      if (!(h["sample_fraction"] > 0)) throw ValidationError("sample_fraction must be > 0");
      break;
    case ModelKind::log_knn: positive_int("k"); break;
    case ModelKind::random_forest:
      positive_int("trees");
      positive_int("depth");
      if (!(h["min_leaf"] >= 1)) throw ValidationError("min_leaf must be >= 1");
      if (h["max_features"] < 0) throw ValidationError("max_features must be >= 0");
      break;
    case ModelKind::gbt:
      positive_int("trees");
      positive_int("depth");
      if (!(h["learning_rate"] > 0 && h["learning_rate"] <= 1)) throw ValidationError("learning_rate must lie in (0,1]");
      if (!(h["min_leaf"] >= 1)) throw ValidationError("min_leaf must be >= 1");
      break;
  }
  return h;
}

double pinball_loss(double y, double y_hat, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("tau must lie in (0,1)");
  return y >= y_hat ? tau * (y - y_hat) : (1.0 - tau) * (y_hat - y);
}

double empirical_quantile(std::vector<double> values, double tau) {
  if (values.empty()) throw std::invalid_argument("empirical_quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = tau * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double standard_normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd to_eigen(const FeatureMatrix& x) {
  Eigen::MatrixXd m(x.rows, x.cols());
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) m(r, c) = x.at(r, c);
  return m;
}

// Lower tau-quantile (smallest v with F(v) >= tau): an exact minimiser of the pinball loss.
double pinball_minimizer(std::vector<double> v, double tau) {
  std::sort(v.begin(), v.end());
  auto k = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(v.size())));
  k = std::clamp<std::size_t>(k, 1, v.size());
  return v[k - 1];
}

void check_schema(const TrainedModel& model, const FeatureMatrix& x) {
  if (x.columns != model.schema)
    throw ValidationError("feature schema mismatch: model expects " + std::to_string(model.schema.size()) +
                          " named columns, got " + std::to_string(x.cols()));
}

int as_int(const Hyperparameters& h, const char* key) { return static_cast<int>(h.at(key)); }

LinearParams fit_log_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& ly, const Hyperparameters& h) {
  return {fit_ols(x, ly, h.at("jitter"))};
}

BaggingParams fit_bagging(const Eigen::MatrixXd& x, const Eigen::VectorXd& ly, const Hyperparameters& h,
                          std::uint64_t seed, int threads) {
  const int members = as_int(h, "members");
  const auto n = x.rows();
  const auto draws = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(h.at("sample_fraction") * n)));
  BaggingParams out;
  out.members.resize(members);
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (int b = 0; b < members; ++b) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Eigen::MatrixXd xb(draws, x.cols());
    Eigen::VectorXd yb(draws);
    for (Eigen::Index i = 0; i < draws; ++i) {
      const auto r = pick(rng);
      xb.row(i) = x.row(r);
      yb(i) = ly(r);
    }
    out.members[b] = fit_ols(xb, yb, h.at("jitter"));
  }
  return out;
}

ForestParams fit_forest(const Eigen::MatrixXd& x, std::span<const double> y, const Hyperparameters& h,
                        std::uint64_t seed, int threads) {
  const int trees = as_int(h, "trees");
  const auto p = static_cast<int>(x.cols());
  TreeOptions opts;
  opts.max_depth = as_int(h, "depth");
  opts.min_leaf = h.at("min_leaf");
  opts.max_features = h.at("max_features") > 0 ? std::min(p, as_int(h, "max_features"))
                                               : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
  const auto order = presort(x);
  const auto n = static_cast<int>(x.rows());
  ForestParams out;
  out.trees.resize(trees);
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (int t = 0; t < trees; ++t) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<double> w(n, 0.0);
    for (int i = 0; i < n; ++i) w[pick(rng)] += 1.0;
    auto leaf_mean = [&](std::span<const int> rows) {
      double sw = 0.0, s = 0.0;
      for (int r : rows) {
        sw += w[r];
        s += w[r] * y[r];
      }
      return sw > 0.0 ? s / sw : 0.0;
    };
    out.trees[t] = grow_tree(x, order, y, w, opts, rng(), leaf_mean);
  }
  return out;
}

GbtParams fit_gbt(const Eigen::MatrixXd& x, std::span<const double> y, double tau, const Hyperparameters& h,
                  std::uint64_t seed) {
  GbtParams out;
  out.learning_rate = h.at("learning_rate");
  TreeOptions opts;
  opts.max_depth = as_int(h, "depth");
  opts.min_leaf = h.at("min_leaf");
  const auto n = static_cast<std::size_t>(x.rows());
  out.init = pinball_minimizer(std::vector<double>(y.begin(), y.end()), tau);
  std::vector<double> f(n, out.init), residual(n), gradient(n);
  const std::vector<double> ones(n, 1.0);
  const auto order = presort(x);
  const int rounds = as_int(h, "trees");
  for (int m = 0; m < rounds; ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = y[i] - f[i];
      gradient[i] = residual[i] > 0.0 ? tau : (residual[i] < 0.0 ? tau - 1.0 : 0.0);
    }
    auto leaf_quantile = [&](std::span<const int> rows) {
      std::vector<double> r;
      r.reserve(rows.size());
      for (int i : rows) r.push_back(residual[i]);
      return r.empty() ? 0.0 : pinball_minimizer(std::move(r), tau);
    };
    std::vector<int> leaf_of;
    auto tree = grow_tree(x, order, gradient, ones, opts, mix_seed(seed, static_cast<std::uint64_t>(m)),
                          leaf_quantile, &leaf_of);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      f[i] += out.learning_rate * tree.nodes[leaf_of[i]].value;
      loss += pinball_loss(y[i], f[i], tau);
    }
    out.training_loss.push_back(loss / static_cast<double>(n));
    out.trees.push_back(std::move(tree));
  }
  return out;
}

// k nearest training rows of each query row; ties go to the lower training index.
std::vector<std::vector<int>> nearest(const KnnParams& p, const Eigen::MatrixXd& z, int threads) {
  const auto q = static_cast<int>(z.rows());
  const auto n = static_cast<int>(p.points.rows());
  const int k = std::min(p.k, n);
  std::vector<std::vector<int>> out(q);
#pragma omp parallel for num_threads(threads) schedule(static)
  for (int r = 0; r < q; ++r) {
    std::vector<std::pair<double, int>> d(n);
    for (int i = 0; i < n; ++i) d[i] = {(p.points.row(i) - z.row(r)).squaredNorm(), i};
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    out[r].resize(k);
    for (int j = 0; j < k; ++j) out[r][j] = d[j].second;
  }
  return out;
}

}  // namespace

TrainedModel fit(const ModelSpec& spec, const FeatureMatrix& x, std::span<const double> y) {
  const Hyperparameters h = resolve_hyperparameters(spec);
  if (x.rows == 0 || x.cols() == 0) throw ValidationError("empty feature matrix");
  if (x.rows < 2) throw ValidationError("fit needs at least 2 rows");
  if (y.size() != x.rows) throw ValidationError("target length does not match rows");
  x.validate();

  TrainedModel model;
  model.kind = spec.kind;
  model.tau = spec.tau;
  model.schema = x.columns;
  model.training_rows = x.rows;
  model.log_target = is_log_kind(spec.kind);
  model.hyperparameters = h;

  const Eigen::MatrixXd xm = to_eigen(x);
  Eigen::VectorXd ly(static_cast<Eigen::Index>(y.size()));
  if (model.log_target) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!(y[i] > 0.0)) throw ValidationError("log-target models need positive targets");
      ly(static_cast<Eigen::Index>(i)) = std::log(y[i]);
    }
  }

  switch (spec.kind) {
    case ModelKind::log_ols: model.params = fit_log_ols(xm, ly, h); break;
    case ModelKind::log_quantile: {
      QuantileFitOptions o;
      o.tau = spec.tau;
      o.learning_rate = h.at("learning_rate");
      o.max_epochs = as_int(h, "max_epochs");
      o.patience = as_int(h, "patience");
      o.min_improvement = h.at("min_improvement");
      model.params = LinearParams{fit_quantile_linear(xm, ly, o).model};
      break;
    }
    case ModelKind::log_bayes_ridge: {
      BayesRidgeOptions o;
      o.max_iterations = as_int(h, "max_iter");
      o.tolerance = h.at("tol");
      o.alpha_1 = h.at("alpha_1");
      o.alpha_2 = h.at("alpha_2");
      o.lambda_1 = h.at("lambda_1");
      o.lambda_2 = h.at("lambda_2");
      o.alpha_init = h.at("alpha_init");
      o.lambda_init = h.at("lambda_init");
      o.maximize_evidence = h.at("evidence") != 0.0;
      model.params = BayesParams{fit_bayes_ridge(xm, ly, o)};
      break;
    }
    case ModelKind::log_bagging: model.params = fit_bagging(xm, ly, h, spec.seed, spec.threads); break;
    case ModelKind::log_knn: {
      KnnParams p;
      p.standardizer = Standardizer::fit(xm);
      p.points = p.standardizer.apply(xm);
      p.targets = ly;
      p.k = as_int(h, "k");
      model.params = std::move(p);
      break;
    }
    case ModelKind::random_forest: model.params = fit_forest(xm, y, h, spec.seed, spec.threads); break;
    case ModelKind::gbt: model.params = fit_gbt(xm, y, spec.tau, h, spec.seed); break;
  }
  return model;
}

std::vector<std::vector<double>> member_predictions(const TrainedModel& model, const FeatureMatrix& x) {
  check_schema(model, x);
  const Eigen::MatrixXd xm = to_eigen(x);
  std::vector<std::vector<double>> out(x.rows);
  if (const auto* bag = std::get_if<BaggingParams>(&model.params)) {
    for (const auto& m : bag->members) {
      const Eigen::VectorXd p = m.predict(xm);
      for (std::size_t r = 0; r < x.rows; ++r) out[r].push_back(std::exp(p(static_cast<Eigen::Index>(r))));
    }
  } else if (const auto* knn = std::get_if<KnnParams>(&model.params)) {
    const auto nb = nearest(*knn, knn->standardizer.apply(xm), 1);
    for (std::size_t r = 0; r < x.rows; ++r)
      for (int i : nb[r]) out[r].push_back(std::exp(knn->targets(i)));
  } else if (const auto* forest = std::get_if<ForestParams>(&model.params)) {
    for (std::size_t r = 0; r < x.rows; ++r)
      for (const auto& t : forest->trees) out[r].push_back(t.predict(x.row(r)));
  } else {
    throw ValidationError(to_string(model.kind) + " is not an ensemble model");
  }
  return out;
}

namespace {

std::vector<double> knn_log_means(const KnnParams& p, const Eigen::MatrixXd& xm) {
  const auto nb = nearest(p, p.standardizer.apply(xm), 1);
  std::vector<double> out(nb.size());
  for (std::size_t r = 0; r < nb.size(); ++r) {
    double s = 0.0;
    for (int i : nb[r]) s += p.targets(i);
    out[r] = s / static_cast<double>(nb[r].size());
  }
  return out;
}

}  // namespace

std::vector<double> predict(const TrainedModel& model, const FeatureMatrix& x) {
  check_schema(model, x);
  const Eigen::MatrixXd xm = to_eigen(x);
  std::vector<double> out(x.rows);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>) {
          const Eigen::VectorXd v = p.model.predict(xm);
          for (std::size_t r = 0; r < x.rows; ++r) out[r] = std::exp(v(static_cast<Eigen::Index>(r)));
        } else if constexpr (std::is_same_v<T, BayesParams>) {
          const Eigen::VectorXd v = p.model.predict(xm);
          for (std::size_t r = 0; r < x.rows; ++r) out[r] = std::exp(v(static_cast<Eigen::Index>(r)));
        } else if constexpr (std::is_same_v<T, BaggingParams>) {
          std::vector<double> acc(x.rows, 0.0);
          for (const auto& m : p.members) {
            const Eigen::VectorXd v = m.predict(xm);
            for (std::size_t r = 0; r < x.rows; ++r) acc[r] += v(static_cast<Eigen::Index>(r));
          }
          for (std::size_t r = 0; r < x.rows; ++r) out[r] = std::exp(acc[r] / static_cast<double>(p.members.size()));
        } else if constexpr (std::is_same_v<T, KnnParams>) {
          const auto means = knn_log_means(p, xm);
          for (std::size_t r = 0; r < x.rows; ++r) out[r] = std::exp(means[r]);
        } else if constexpr (std::is_same_v<T, ForestParams>) {
          for (std::size_t r = 0; r < x.rows; ++r) {
            double s = 0.0;
            for (const auto& t : p.trees) s += t.predict(x.row(r));
            out[r] = s / static_cast<double>(p.trees.size());
          }
        } else {
          for (std::size_t r = 0; r < x.rows; ++r) {
            double s = p.init;
            for (const auto& t : p.trees) s += p.learning_rate * t.predict(x.row(r));
            out[r] = s;
          }
        }
      },
      model.params);
  return out;
}

ConservativePrediction predict_conservative(const TrainedModel& model, const FeatureMatrix& x, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0,1)");
  ConservativePrediction out;
  switch (model.kind) {
    case ModelKind::log_quantile:
    case ModelKind::gbt:
      if (std::abs(tau - model.tau) > 1e-12)
        throw ValidationError(to_string(model.kind) + " was trained at tau=" + std::to_string(model.tau) +
                              ", cannot predict at tau=" + std::to_string(tau));
      out.values = predict(model, x);
      break;
    case ModelKind::log_ols:
      out.values = predict(model, x);
      out.has_mechanism = false;
      break;
    case ModelKind::log_bayes_ridge: {
      check_schema(model, x);
      const auto& m = std::get<BayesParams>(model.params).model;
      const Eigen::MatrixXd xm = to_eigen(x);
      const Eigen::VectorXd mu = m.predict(xm);
      const Eigen::VectorXd sd = m.predictive_std(xm);
      const double z = standard_normal_quantile(tau);
      out.values.resize(x.rows);
      for (std::size_t r = 0; r < x.rows; ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        out.values[r] = std::exp(mu(i) + z * sd(i));
      }
      break;
    }
    case ModelKind::log_bagging:
    case ModelKind::log_knn:
    case ModelKind::random_forest: {
      const auto members = member_predictions(model, x);
      out.values.resize(x.rows);
      for (std::size_t r = 0; r < x.rows; ++r) out.values[r] = empirical_quantile(members[r], tau);
      break;
    }
  }
  return out;
}

namespace {

constexpr int kModelSchemaVersion = 1;

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd mat_from_json(const json& j) {
  Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) = vec_from_json(data.at(r)).transpose();
  return m;
}

json standardizer_to_json(const Standardizer& s) { return {{"mean", vec_to_json(s.mean)}, {"scale", vec_to_json(s.scale)}}; }

Standardizer standardizer_from_json(const json& j) {
  return {vec_from_json(j.at("mean")), vec_from_json(j.at("scale"))};
}

json linear_to_json(const LinearModel& m) {
  return {{"standardizer", standardizer_to_json(m.standardizer)},
          {"intercept", m.intercept},
          {"weights", vec_to_json(m.weights)}};
}

LinearModel linear_from_json(const json& j) {
  LinearModel m;
  m.standardizer = standardizer_from_json(j.at("standardizer"));
  m.intercept = j.at("intercept").get<double>();
  m.weights = vec_from_json(j.at("weights"));
  return m;
}

json tree_to_json(const RegressionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return nodes;
}

RegressionTree tree_from_json(const json& j) {
  RegressionTree t;
  for (const auto& n : j)
    t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                       n.at(4).get<double>()});
  return t;
}

}  // namespace

json model_to_json(const TrainedModel& model) {
  json params;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearParams>) {
          params = linear_to_json(p.model);
        } else if constexpr (std::is_same_v<T, BaggingParams>) {
          params["members"] = json::array();
          for (const auto& m : p.members) params["members"].push_back(linear_to_json(m));
        } else if constexpr (std::is_same_v<T, BayesParams>) {
          params = {{"standardizer", standardizer_to_json(p.model.standardizer)},
                    {"intercept", p.model.intercept},
                    {"weights", vec_to_json(p.model.weights)},
                    {"covariance", mat_to_json(p.model.covariance)},
                    {"alpha", p.model.alpha},
                    {"lambda", p.model.lambda},
                    {"iterations", p.model.iterations}};
        } else if constexpr (std::is_same_v<T, KnnParams>) {
          params = {{"standardizer", standardizer_to_json(p.standardizer)},
                    {"points", mat_to_json(p.points)},
                    {"targets", vec_to_json(p.targets)},
                    {"k", p.k}};
        } else if constexpr (std::is_same_v<T, ForestParams>) {
          params["trees"] = json::array();
          for (const auto& t : p.trees) params["trees"].push_back(tree_to_json(t));
        } else {
          params = {{"init", p.init}, {"learning_rate", p.learning_rate}, {"training_loss", p.training_loss}};
          params["trees"] = json::array();
          for (const auto& t : p.trees) params["trees"].push_back(tree_to_json(t));
        }
      },
      model.params);
  return {{"kind", "roadwork.model"},
          {"schema_version", kModelSchemaVersion},
          {"model", to_string(model.kind)},
          {"tau", model.tau},
          {"features", model.schema},
          {"training_rows", model.training_rows},
          {"log_target", model.log_target},
          {"hyperparameters", model.hyperparameters},
          {"params", params}};
}

TrainedModel model_from_json(const json& j) {
  if (j.value("kind", "") != "roadwork.model") throw ValidationError("not a serialized model");
  if (j.at("schema_version").get<int>() != kModelSchemaVersion)
    throw ValidationError("unsupported model schema version");
  TrainedModel m;
  m.kind = model_kind_from_string(j.at("model").get<std::string>());
  m.tau = j.at("tau").get<double>();
  m.schema = j.at("features").get<std::vector<std::string>>();
  m.training_rows = j.at("training_rows").get<std::size_t>();
  m.log_target = j.at("log_target").get<bool>();
  m.hyperparameters = j.at("hyperparameters").get<Hyperparameters>();
  const json& p = j.at("params");
  switch (m.kind) {
    case ModelKind::log_ols:
    case ModelKind::log_quantile: m.params = LinearParams{linear_from_json(p)}; break;
    case ModelKind::log_bagging: {
      BaggingParams b;
      for (const auto& mj : p.at("members")) b.members.push_back(linear_from_json(mj));
      m.params = std::move(b);
      break;
    }
    case ModelKind::log_bayes_ridge: {
      BayesRidgeModel b;
      b.standardizer = standardizer_from_json(p.at("standardizer"));
      b.intercept = p.at("intercept").get<double>();
      b.weights = vec_from_json(p.at("weights"));
      b.covariance = mat_from_json(p.at("covariance"));
      b.alpha = p.at("alpha").get<double>();
      b.lambda = p.at("lambda").get<double>();
      b.iterations = p.at("iterations").get<int>();
      m.params = BayesParams{std::move(b)};
      break;
    }
    case ModelKind::log_knn: {
      KnnParams k;
      k.standardizer = standardizer_from_json(p.at("standardizer"));
      k.points = mat_from_json(p.at("points"));
      k.targets = vec_from_json(p.at("targets"));
      k.k = p.at("k").get<int>();
      m.params = std::move(k);
      break;
    }
    case ModelKind::random_forest: {
      ForestParams f;
      for (const auto& t : p.at("trees")) f.trees.push_back(tree_from_json(t));
      m.params = std::move(f);
      break;
    }
    case ModelKind::gbt: {
      GbtParams g;
      g.init = p.at("init").get<double>();
      g.learning_rate = p.at("learning_rate").get<double>();
      g.training_loss = p.at("training_loss").get<std::vector<double>>();
      for (const auto& t : p.at("trees")) g.trees.push_back(tree_from_json(t));
      m.params = std::move(g);
      break;
    }
  }
  return m;
}

}  // namespace roadwork
