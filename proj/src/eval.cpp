#include "roadwork/eval.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>

#include "roadwork/errors.hpp"
#include "roadwork/heuristics.hpp"

#ifndef ROADWORK_REVISION
#define ROADWORK_REVISION "unknown"
#endif

namespace roadwork {

using nlohmann::json;

Metrics compute_metrics(std::span<const double> truth, std::span<const double> predicted, double tau) {
  if (truth.size() != predicted.size()) throw ValidationError("metric inputs differ in length");
  if (truth.empty()) throw ValidationError("metrics need at least one row");
  Metrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!(truth[i] > 0.0)) throw ValidationError("percentage error needs positive targets");
    const double diff = predicted[i] - truth[i];
    m.mae += std::abs(diff);
    m.bias += diff;
    m.pinball += pinball_loss(truth[i], predicted[i], tau);
    m.mape += std::abs(diff) / truth[i];
  }
  const auto n = static_cast<double>(truth.size());
  m.mae /= n;
  m.bias /= n;
  m.pinball /= n;
  m.mape = 100.0 * m.mape / n;
  return m;
}

std::string display_name(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::costliest_subset: return "CostliestSubset";
    case HeuristicKind::additive_subset: return "AdditiveSubset";
    case HeuristicKind::cheapest_superset: return "CheapestSuperset";
  }
  return "?";
}

std::string display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::log_ols: return "LogOLS";
    case ModelKind::log_quantile: return "LogQuantile";
    case ModelKind::log_bayes_ridge: return "LogBayesRidge";
    case ModelKind::log_bagging: return "LogBagging";
    case ModelKind::log_knn: return "LogKNN";
    case ModelKind::random_forest: return "RandomForest";
    case ModelKind::gbt: return "GBT";
  }
  return "?";
}

EvalModel eval_model_from_name(const std::string& name) {
  static const std::map<std::string, HeuristicKind> heuristics{
      {"csh", HeuristicKind::costliest_subset},    {"cash", HeuristicKind::additive_subset},
      {"csuph", HeuristicKind::cheapest_superset}, {"CostliestSubset", HeuristicKind::costliest_subset},
      {"AdditiveSubset", HeuristicKind::additive_subset}, {"CheapestSuperset", HeuristicKind::cheapest_superset}};
  if (auto it = heuristics.find(name); it != heuristics.end()) return {display_name(it->second), it->second};
  for (auto k : {ModelKind::log_ols, ModelKind::log_quantile, ModelKind::log_bayes_ridge, ModelKind::log_bagging,
                 ModelKind::log_knn, ModelKind::random_forest, ModelKind::gbt}) {
    if (name == to_string(k) || name == display_name(k)) {
      ModelSpec spec;
      spec.kind = k;
      return {display_name(k), spec};
    }
  }
  throw ValidationError("unknown model '" + name + "'");
}

void EvalConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0,1)");
  if (!(time_cap_seconds > 0.0)) throw ValidationError("time_cap_seconds must be > 0");
  if (time_cap_window < 1) throw ValidationError("time_cap_window must be >= 1");
  if (workers < 1) throw ValidationError("workers must be >= 1");
}

bool time_cap_exceeded(std::span<const double> seconds, std::size_t window, double cap) {
  if (seconds.empty() || window == 0) return false;
  const std::size_t k = std::min(window, seconds.size());
  std::vector<double> tail(seconds.end() - static_cast<std::ptrdiff_t>(k), seconds.end());
  std::sort(tail.begin(), tail.end());
  const double median = k % 2 ? tail[k / 2] : 0.5 * (tail[k / 2 - 1] + tail[k / 2]);
  return median > cap;
}

namespace {

std::uint64_t task_seed(std::uint64_t seed, std::size_t model, std::size_t iteration) {
  std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (model + 1)) ^ (0xc2b2ae3d27d4eb4fULL * (iteration + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct TaskResult {
  std::vector<double> predictions;
  double seconds = 0.0;
  std::exception_ptr error;
};

}  // namespace

EvalReport run_online_eval(const Dataset& dataset, const BaselineStats& stats, const std::vector<EvalModel>& models,
                           const EvalConfig& config, const EvalHooks& hooks) {
  if (models.empty()) throw ValidationError("model list is empty");
  config.validate();
  {
    std::vector<std::string> names;
    for (const auto& m : models) names.push_back(m.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
      throw ValidationError("model names must be unique");
  }
  const std::size_t batch = config.batch_size;
  const std::size_t available = dataset.scenarios.size() / batch;
  const std::size_t iterations = std::min(config.iterations, available);
  if (iterations == 0) throw ValidationError("dataset holds fewer rows than one batch");
  const std::size_t used_rows = iterations * batch;
  const std::span<const LabeledScenario> rows(dataset.scenarios.data(), used_rows);

  const bool any_regression =
      std::any_of(models.begin(), models.end(), [](const EvalModel& m) { return !m.is_heuristic(); });
  // Row i's CSH column is taken against rows [0, i) only.
  FeatureMatrix all_features;
  std::optional<std::size_t> csh_column;
  if (any_regression) {
    const SubsetIndex start(dataset.baseline_ttt);
    all_features = build_feature_matrix(rows, config.features, stats, &start, true);
    if (config.features.include_csh) csh_column = all_features.find("csh");
  }
  std::vector<double> targets(used_rows);
  for (std::size_t i = 0; i < used_rows; ++i) targets[i] = rows[i].ttt;

  EvalReport report;
  for (const auto& m : models) report.models.push_back(m.name);
  report.iterations_requested = config.iterations;
  report.iterations_run = iterations;
  report.dataset_fingerprint = dataset.network_fingerprint;
  report.revision = revision_string();

  std::vector<bool> alive(models.size(), true);
  std::vector<std::vector<double>> history(models.size());
  SubsetIndex index(dataset.baseline_ttt);
  double max_label = dataset.baseline_ttt;

  for (std::size_t t = 0; t < iterations; ++t) {
    if (hooks.progress) hooks.progress(t, iterations);
    const std::size_t train_end = t * batch;
    const std::size_t test_end = train_end + batch;
    for (std::size_t i = (t == 0 ? 0 : train_end - batch); i < train_end; ++i) {
      index.insert(rows[i]);
      max_label = std::max(max_label, rows[i].ttt);
    }
    const std::span<const double> truth(targets.data() + train_end, batch);

    FeatureMatrix train_x, test_x;
    if (any_regression) {
      train_x = all_features.select_rows(0, train_end);
      test_x = all_features.select_rows(train_end, test_end);
      if (csh_column)
        for (std::size_t r = 0; r < batch; ++r) test_x.at(r, *csh_column) = csh(index, rows[train_end + r].config);
    }

    std::vector<std::size_t> live;
    for (std::size_t m = 0; m < models.size(); ++m)
      if (alive[m]) live.push_back(m);
    std::vector<TaskResult> results(live.size());
    std::vector<std::optional<TrainedModel>> fitted(live.size());

#pragma omp parallel for num_threads(config.workers) schedule(dynamic)
    for (std::size_t j = 0; j < live.size(); ++j) {
      const EvalModel& model = models[live[j]];
      TaskResult& res = results[j];
      try {
        const auto started = std::chrono::steady_clock::now();
        if (const auto* h = std::get_if<HeuristicKind>(&model.method)) {
          res.predictions.resize(batch);
          for (std::size_t r = 0; r < batch; ++r) {
            const auto& cfg = rows[train_end + r].config;
            switch (*h) {
              case HeuristicKind::costliest_subset: res.predictions[r] = csh(index, cfg); break;
              case HeuristicKind::additive_subset: res.predictions[r] = cash(index, cfg); break;
              case HeuristicKind::cheapest_superset: res.predictions[r] = csuph(index, cfg).value_or(max_label); break;
            }
          }
        } else if (train_end < 2) {
          res.predictions.assign(batch, dataset.baseline_ttt);
        } else {
          ModelSpec spec = std::get<ModelSpec>(model.method);
          spec.seed = task_seed(config.seed, live[j], t);
          if (is_pinball_kind(spec.kind)) spec.tau = config.tau;
          TrainedModel trained = fit(spec, train_x, std::span<const double>(targets.data(), train_end));
          res.predictions = predict_conservative(trained, test_x, config.tau).values;
          if (hooks.fitted) fitted[j] = std::move(trained);
        }
        res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      } catch (...) {
        res.error = std::current_exception();
      }
    }

    for (std::size_t j = 0; j < live.size(); ++j) {
      const std::size_t m = live[j];
      TaskResult& res = results[j];
      if (res.error) std::rethrow_exception(res.error);
      for (double v : res.predictions)
        if (!std::isfinite(v))
          throw SolverError(models[m].name + " produced a non-finite prediction at iteration " + std::to_string(t));
      if (hooks.predictions) hooks.predictions(m, t, res.predictions);
      if (hooks.fitted && fitted[j]) hooks.fitted(m, t, *fitted[j]);
      const double measured = hooks.timing ? hooks.timing(m, t, res.seconds) : res.seconds;
      history[m].push_back(measured);

      IterationRecord rec;
      rec.iteration = t;
      rec.model = models[m].name;
      rec.train_rows = train_end;
      rec.metrics = compute_metrics(truth, res.predictions, config.tau);
      rec.seconds = config.record_timing ? measured : 0.0;
      rec.terminated = time_cap_exceeded(history[m], config.time_cap_window, config.time_cap_seconds);
      if (rec.terminated) alive[m] = false;
      report.records.push_back(std::move(rec));
    }
    if (std::none_of(alive.begin(), alive.end(), [](bool a) { return a; })) break;
  }
  report.averages = compute_averages(report.models, report.records);
  return report;
}

namespace {

Metrics mean_of(const std::vector<const IterationRecord*>& recs) {
  Metrics m;
  if (recs.empty()) return m;
  for (const auto* r : recs) {
    m.mae += r->metrics.mae;
    m.pinball += r->metrics.pinball;
    m.bias += r->metrics.bias;
    m.mape += r->metrics.mape;
  }
  const auto n = static_cast<double>(recs.size());
  m.mae /= n;
  m.pinball /= n;
  m.bias /= n;
  m.mape /= n;
  return m;
}

}  // namespace

std::vector<ModelAverages> compute_averages(const std::vector<std::string>& models,
                                            const std::vector<IterationRecord>& records) {
  std::vector<ModelAverages> out;
  for (const auto& name : models) {
    ModelAverages a;
    a.model = name;
    std::vector<const IterationRecord*> mine;
    for (const auto& r : records)
      if (r.model == name) {
        mine.push_back(&r);
        a.seconds += r.seconds;
        a.terminated = a.terminated || r.terminated;
      }
    a.iterations = mine.size();
    a.mean = mean_of(mine);
    if (!mine.empty()) a.seconds /= static_cast<double>(mine.size());

    std::vector<double> mapes;
    for (const auto* r : mine) mapes.push_back(r->metrics.mape);
    std::vector<const IterationRecord*> kept;
    if (!mapes.empty()) {
      std::sort(mapes.begin(), mapes.end());
      const std::size_t k = mapes.size();
      const double median = k % 2 ? mapes[k / 2] : 0.5 * (mapes[k / 2 - 1] + mapes[k / 2]);
      for (const auto* r : mine)
        if (!(r->metrics.mape > 10.0 * median)) kept.push_back(r);
    }
    a.filtered_iterations = kept.size();
    a.filtered = mean_of(kept);
    out.push_back(std::move(a));
  }
  return out;
}

std::string revision_string() { return ROADWORK_REVISION; }

void write_iterations_csv(const EvalReport& report, std::ostream& out) {
  out << "iteration,model,train_rows,mae,pinball,bias,mape,seconds,terminated\n";
  for (const auto& r : report.records)
    fmt::print(out, "{},{},{},{},{},{},{},{},{}\n", r.iteration, r.model, r.train_rows, r.metrics.mae,
               r.metrics.pinball, r.metrics.bias, r.metrics.mape, r.seconds, r.terminated ? 1 : 0);
}

void write_averages_csv(const EvalReport& report, std::ostream& out) {
  out << "model,iterations,mae,pinball,bias,mape,seconds,terminated,"
         "filtered_iterations,filtered_mae,filtered_pinball,filtered_bias,filtered_mape\n";
  for (const auto& a : report.averages)
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{},{},{}\n", a.model, a.iterations, a.mean.mae, a.mean.pinball,
               a.mean.bias, a.mean.mape, a.seconds, a.terminated ? "exceeded_time_cap" : "", a.filtered_iterations,
               a.filtered.mae, a.filtered.pinball, a.filtered.bias, a.filtered.mape);
}

void print_averages_table(const EvalReport& report, std::ostream& out) {
  fmt::print(out, "{:<18} {:>6} {:>14} {:>14} {:>14} {:>9} {:>10}\n", "model", "iters", "MAE", "pinball", "bias",
             "MAPE%", "seconds");
  for (const auto& a : report.averages)
    fmt::print(out, "{:<18} {:>6} {:>14.2f} {:>14.2f} {:>14.2f} {:>9.3f} {:>10.4f}{}\n", a.model, a.iterations,
               a.mean.mae, a.mean.pinball, a.mean.bias, a.mean.mape, a.seconds,
               a.terminated ? "  (exceeded time cap)" : "");
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_pinball_svg(const EvalReport& report) {
  constexpr double width = 800, height = 480, left = 80, right = 200, top = 40, bottom = 60;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : report.records)
    if (r.metrics.pinball > 0.0) {
      lo = std::min(lo, r.metrics.pinball);
      hi = std::max(hi, r.metrics.pinball);
    }
  if (!(hi > 0.0)) lo = hi = 1.0;
  double ylo = std::floor(std::log10(lo)), yhi = std::ceil(std::log10(hi));
  if (yhi <= ylo) yhi = ylo + 1;
  const double xmax = std::max<double>(1.0, static_cast<double>(report.iterations_run) - 1.0);
  auto sx = [&](double it) { return left + plot_w * it / xmax; };
  auto sy = [&](double v) {
    const double lv = std::log10(std::max(v, std::pow(10.0, ylo)));
    return top + plot_h * (1.0 - (lv - ylo) / (yhi - ylo));
  };

  std::ostringstream svg;
  fmt::print(svg, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
  fmt::print(svg,
             "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\" "
             "font-family=\"sans-serif\" font-size=\"12\">\n",
             width, height, width, height);
  fmt::print(svg, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", width, height);
  fmt::print(svg, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">Pinball loss per iteration</text>\n",
             left + plot_w / 2);
  fmt::print(svg, "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", left, top,
             plot_w, plot_h);
  for (int e = static_cast<int>(ylo); e <= static_cast<int>(yhi); ++e) {
    const double y = sy(std::pow(10.0, e));
    fmt::print(svg, "<line x1=\"{}\" y1=\"{:.2f}\" x2=\"{}\" y2=\"{:.2f}\" stroke=\"#dddddd\"/>\n", left, y,
               left + plot_w, y);
    fmt::print(svg, "<text x=\"{}\" y=\"{:.2f}\" text-anchor=\"end\">1e{}</text>\n", left - 6, y + 4, e);
  }
  const std::size_t step = std::max<std::size_t>(1, report.iterations_run / 10);
  for (std::size_t it = 0; it < report.iterations_run; it += step)
    fmt::print(svg, "<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", sx(static_cast<double>(it)),
               top + plot_h + 18, it);
  fmt::print(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">iteration</text>\n", left + plot_w / 2,
             height - 16);
  fmt::print(svg,
             "<text x=\"20\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">mean pinball loss "
             "(log scale)</text>\n",
             top + plot_h / 2, top + plot_h / 2);

  for (std::size_t m = 0; m < report.models.size(); ++m) {
    const char* colour = palette[m % std::size(palette)];
    std::string points;
    for (const auto& r : report.records)
      if (r.model == report.models[m])
        points += fmt::format("{}{:.2f},{:.2f}", points.empty() ? "" : " ", sx(static_cast<double>(r.iteration)),
                              sy(r.metrics.pinball));
    fmt::print(svg, "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", colour, points);
    const double ly = top + 10 + 20.0 * static_cast<double>(m);
    fmt::print(svg, "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
               left + plot_w + 15, ly, left + plot_w + 40, ly, colour);
    fmt::print(svg, "<text x=\"{}\" y=\"{}\">{}</text>\n", left + plot_w + 46, ly + 4,
               xml_escape(report.models[m]));
  }
  svg << "</svg>\n";
  return svg.str();
}

namespace {

json metrics_json(const Metrics& m) {
  return {{"mae", m.mae}, {"pinball", m.pinball}, {"bias", m.bias}, {"mape", m.mape}};
}

Metrics metrics_from(const json& j) {
  return {j.at("mae").get<double>(), j.at("pinball").get<double>(), j.at("bias").get<double>(),
          j.at("mape").get<double>()};
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(std::abs(a), std::abs(b))); }

bool close(const Metrics& a, const Metrics& b) {
  return close(a.mae, b.mae) && close(a.pinball, b.pinball) && close(a.bias, b.bias) && close(a.mape, b.mape);
}

}  // namespace

json report_to_json(const EvalReport& report) {
  json records = json::array();
  for (const auto& r : report.records)
    records.push_back({{"iteration", r.iteration},
                       {"model", r.model},
                       {"train_rows", r.train_rows},
                       {"metrics", metrics_json(r.metrics)},
                       {"seconds", r.seconds},
                       {"terminated", r.terminated}});
  json averages = json::array();
  for (const auto& a : report.averages)
    averages.push_back({{"model", a.model},
                        {"iterations", a.iterations},
                        {"mean", metrics_json(a.mean)},
                        {"seconds", a.seconds},
                        {"terminated", a.terminated},
                        {"filtered_iterations", a.filtered_iterations},
                        {"filtered", metrics_json(a.filtered)}});
  return {{"kind", "roadwork.report"},
          {"schema_version", EvalReport::schema_version},
          {"revision", report.revision},
          {"dataset_fingerprint", report.dataset_fingerprint},
          {"config", report.config},
          {"models", report.models},
          {"iterations_requested", report.iterations_requested},
          {"iterations_run", report.iterations_run},
          {"records", records},
          {"averages", averages}};
}

EvalReport report_from_json(const json& j) {
  if (j.value("kind", "") != "roadwork.report") throw ValidationError("not an evaluation report");
  if (j.at("schema_version").get<int>() != EvalReport::schema_version)
    throw ValidationError("unsupported report schema version");
  EvalReport report;
  report.revision = j.at("revision").get<std::string>();
  report.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
  report.config = j.at("config");
  report.models = j.at("models").get<std::vector<std::string>>();
  report.iterations_requested = j.at("iterations_requested").get<std::size_t>();
  report.iterations_run = j.at("iterations_run").get<std::size_t>();
  for (const auto& r : j.at("records"))
    report.records.push_back({r.at("iteration").get<std::size_t>(), r.at("model").get<std::string>(),
                              r.at("train_rows").get<std::size_t>(), metrics_from(r.at("metrics")),
                              r.at("seconds").get<double>(), r.at("terminated").get<bool>()});
  for (const auto& a : j.at("averages")) {
    ModelAverages m;
    m.model = a.at("model").get<std::string>();
    m.iterations = a.at("iterations").get<std::size_t>();
    m.mean = metrics_from(a.at("mean"));
    m.seconds = a.at("seconds").get<double>();
    m.terminated = a.at("terminated").get<bool>();
    m.filtered_iterations = a.at("filtered_iterations").get<std::size_t>();
    m.filtered = metrics_from(a.at("filtered"));
    report.averages.push_back(std::move(m));
  }
  const auto recomputed = compute_averages(report.models, report.records);
  if (recomputed.size() != report.averages.size()) throw ValidationError("report averages do not match its models");
  for (std::size_t i = 0; i < recomputed.size(); ++i) {
    const auto& a = report.averages[i];
    const auto& b = recomputed[i];
    if (a.model != b.model || a.iterations != b.iterations || a.terminated != b.terminated ||
        a.filtered_iterations != b.filtered_iterations || !close(a.mean, b.mean) || !close(a.filtered, b.filtered) ||
        !close(a.seconds, b.seconds))
      throw ValidationError("stored averages for " + a.model + " disagree with the per-iteration records");
  }
  return report;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  std::ostringstream iterations, averages;
  write_iterations_csv(report, iterations);
  write_averages_csv(report, averages);
  write_file(dir / "iterations.csv", iterations.str());
  write_file(dir / "averages.csv", averages.str());
  write_file(dir / "pinball.svg", render_pinball_svg(report));
  write_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
  return report_from_json(j);
}

}  // namespace roadwork
