#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "roadwork/errors.hpp"
#include "roadwork/eval.hpp"
#include "support.hpp"

using namespace roadwork;
using namespace roadwork::testing;

namespace {

const BaselineStats& sf_stats() {
  static const BaselineStats s = [] {
    const auto& sf = sioux_falls();
    return compute_baseline_stats(sf.network, solve_ue(sf.network, sf.demand), 2);
  }();
  return s;
}

// Labels grow with every closed link, standing in for solver output.
Dataset synthetic_dataset(std::size_t n, std::uint64_t seed) {
  const auto& s = sf_stats();
  Dataset ds;
  ds.network_fingerprint = "synthetic";
  ds.baseline_ttt = s.baseline_ttt;
  ds.rng_seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> link(0, 75), size(1, 5);
  std::set<ClosureConfig> seen;
  while (ds.scenarios.size() < n) {
    std::vector<LinkId> ids;
    for (int k = size(rng); k > 0; --k) ids.push_back(link(rng));
    ClosureConfig cfg(ids);
    if (!seen.insert(cfg).second) continue;
    double ttt = s.baseline_ttt;
    for (LinkId l : cfg.ids()) ttt += s.flow[l] * s.cost[l] * 0.2 * (1.0 + 0.3 * static_cast<double>(cfg.size()));
    ds.scenarios.push_back({cfg, ttt, 1e-5, 0.0});
  }
  return ds;
}

EvalConfig small_config() {
  EvalConfig c;
  c.batch_size = 40;
  c.iterations = 3;
  c.seed = 5;
  return c;
}

std::vector<EvalModel> models_of(std::initializer_list<const char*> names) {
  std::vector<EvalModel> out;
  for (const char* n : names) {
    out.push_back(eval_model_from_name(n));
    if (auto* spec = std::get_if<ModelSpec>(&out.back().method)) {
      if (spec->kind == ModelKind::gbt) spec->hyperparameters = {{"trees", 30}};
      if (spec->kind == ModelKind::random_forest) spec->hyperparameters = {{"trees", 10}};
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("metric fixtures") {
  const std::vector<double> truth{100, 200}, pred{110, 180};
  const auto m = compute_metrics(truth, pred, 0.1);
  CHECK(m.mae == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(m.bias == doctest::Approx(-5.0).epsilon(1e-12));
  CHECK(m.mape == doctest::Approx(10.0).epsilon(1e-12));
  // 10 over: (1-0.1)*10 = 9; 20 under: 0.1*20 = 2.
  CHECK(m.pinball == doctest::Approx(5.5).epsilon(1e-12));
  CHECK_THROWS_AS(compute_metrics(truth, std::vector<double>{1}, 0.1), ValidationError);
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{}, std::vector<double>{}, 0.1), ValidationError);
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{0.0}, std::vector<double>{1.0}, 0.1), ValidationError);
}

TEST_CASE("model names") {
  CHECK(eval_model_from_name("csh").name == "CostliestSubset");
  CHECK(eval_model_from_name("CheapestSuperset").is_heuristic());
  CHECK(eval_model_from_name("gbt").name == "GBT");
  CHECK(eval_model_from_name("LogKNN").name == "LogKNN");
  CHECK(std::get<ModelSpec>(eval_model_from_name("random_forest").method).kind == ModelKind::random_forest);
  CHECK_THROWS_AS(eval_model_from_name("magic"), ValidationError);
}

TEST_CASE("time cap rule") {
  CHECK_FALSE(time_cap_exceeded(std::vector<double>{}, 3, 1.0));
  CHECK_FALSE(time_cap_exceeded(std::vector<double>{5, 0, 0}, 3, 1.0));
  CHECK(time_cap_exceeded(std::vector<double>{0, 5, 5}, 3, 1.0));
  CHECK_FALSE(time_cap_exceeded(std::vector<double>{5, 5, 0, 0, 0}, 3, 1.0));
  CHECK(time_cap_exceeded(std::vector<double>{2}, 3, 1.0));
}

TEST_CASE("iteration zero: regression models predict the baseline, CSH equals it") {
  const auto ds = synthetic_dataset(120, 1);
  std::vector<std::vector<double>> first(2);
  EvalHooks hooks;
  hooks.predictions = [&](std::size_t m, std::size_t t, std::span<const double> p) {
    if (t == 0) first[m].assign(p.begin(), p.end());
  };
  run_online_eval(ds, sf_stats(), models_of({"csh", "log_ols"}), small_config(), hooks);
  for (const auto& preds : first) {
    REQUIRE(preds.size() == 40);
    for (double v : preds) CHECK(v == ds.baseline_ttt);
  }
}

TEST_CASE("records, averages and outputs") {
  const auto ds = synthetic_dataset(150, 2);
  auto cfg = small_config();
  const auto report = run_online_eval(ds, sf_stats(), models_of({"csh", "gbt"}), cfg);
  CHECK(report.iterations_requested == 3);
  CHECK(report.iterations_run == 3);
  REQUIRE(report.records.size() == 6);
  for (const auto& r : report.records) {
    CHECK(r.train_rows == r.iteration * 40);
    CHECK(r.seconds == 0.0);
    CHECK_FALSE(r.terminated);
  }
  REQUIRE(report.averages.size() == 2);
  double mean_pinball = 0.0;
  for (const auto& r : report.records)
    if (r.model == "GBT") mean_pinball += r.metrics.pinball / 3.0;
  CHECK(report.averages[1].mean.pinball == doctest::Approx(mean_pinball).epsilon(1e-12));

  std::ostringstream iters;
  write_iterations_csv(report, iters);
  const std::string text = iters.str();
  CHECK(text.rfind("iteration,model,train_rows,mae,pinball,bias,mape,seconds,terminated\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);

  std::ostringstream avg;
  write_averages_csv(report, avg);
  CHECK(avg.str().rfind("model,iterations,mae,pinball,bias,mape,seconds,terminated,filtered_iterations", 0) == 0);

  const std::string svg = render_pinball_svg(report);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '<') == std::count(svg.begin(), svg.end(), '>'));
  CHECK(svg.find("CostliestSubset") != std::string::npos);

  const auto dir = scratch_dir("eval_outputs");
  emit_report(report, dir);
  for (const char* f : {"iterations.csv", "averages.csv", "pinball.svg", "report.json"})
    CHECK(std::filesystem::exists(dir / f));
  CHECK(load_report(dir / "report.json") == report);
  CHECK(read_file(dir / "iterations.csv") == text);
}

TEST_CASE("stored averages are checked on load") {
  const auto ds = synthetic_dataset(120, 3);
  const auto report = run_online_eval(ds, sf_stats(), models_of({"csh", "cash"}), small_config());
  auto j = report_to_json(report);
  CHECK(report_from_json(j) == report);
  j["averages"][0]["mean"]["pinball"] = j["averages"][0]["mean"]["pinball"].get<double>() + 1.0;
  CHECK_THROWS_AS(report_from_json(j), ValidationError);
}

TEST_CASE("time cap terminates a model and marks it") {
  const auto ds = synthetic_dataset(200, 4);
  auto cfg = small_config();
  cfg.iterations = 5;
  cfg.time_cap_seconds = 1.0;
  cfg.time_cap_window = 2;
  const auto models = models_of({"csh", "log_ols"});

  EvalHooks zero;
  zero.timing = [](std::size_t, std::size_t, double) { return 0.0; };
  const auto fast = run_online_eval(ds, sf_stats(), models, cfg, zero);
  CHECK(fast.records.size() == 10);
  for (const auto& a : fast.averages) CHECK_FALSE(a.terminated);

  EvalHooks slow;
  slow.timing = [](std::size_t m, std::size_t t, double) { return m == 1 && t >= 1 ? 50.0 : 0.0; };
  const auto capped = run_online_eval(ds, sf_stats(), models, cfg, slow);
  std::size_t ols_records = 0;
  for (const auto& r : capped.records)
    if (r.model == "LogOLS") ++ols_records;
  // Median of {0, 50} is 25 > 1, so the model stops after iteration 1.
  CHECK(ols_records == 2);
  CHECK(capped.averages[1].terminated);
  CHECK_FALSE(capped.averages[0].terminated);
  std::ostringstream avg;
  write_averages_csv(capped, avg);
  CHECK(avg.str().find("exceeded_time_cap") != std::string::npos);
}

TEST_CASE("recorded timing is opt-in") {
  const auto ds = synthetic_dataset(80, 5);
  auto cfg = small_config();
  cfg.iterations = 2;
  cfg.record_timing = true;
  EvalHooks fixed;
  fixed.timing = [](std::size_t, std::size_t, double) { return 0.25; };
  const auto report = run_online_eval(ds, sf_stats(), models_of({"csh"}), cfg, fixed);
  for (const auto& r : report.records) CHECK(r.seconds == 0.25);
}

TEST_CASE("outlier filter drops iterations far above the median MAPE") {
  std::vector<IterationRecord> recs;
  for (std::size_t t = 0; t < 5; ++t) {
    IterationRecord r;
    r.iteration = t;
    r.model = "M";
    r.metrics = {1.0, 1.0, 0.0, t == 4 ? 500.0 : 10.0};
    recs.push_back(r);
  }
  const auto avg = compute_averages({"M"}, recs);
  REQUIRE(avg.size() == 1);
  CHECK(avg[0].iterations == 5);
  CHECK(avg[0].filtered_iterations == 4);
  CHECK(avg[0].filtered.mape == doctest::Approx(10.0));
  CHECK(avg[0].mean.mape == doctest::Approx(108.0));
}

TEST_CASE("evaluation is deterministic and independent of workers") {
  const auto ds = synthetic_dataset(160, 6);
  auto cfg = small_config();
  const auto models = models_of({"csh", "csuph", "log_bagging", "random_forest", "gbt"});
  const auto a = run_online_eval(ds, sf_stats(), models, cfg);
  cfg.workers = 4;
  const auto b = run_online_eval(ds, sf_stats(), models, cfg);
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
}

TEST_CASE("configuration errors") {
  const auto ds = synthetic_dataset(50, 7);
  auto cfg = small_config();
  CHECK_THROWS_AS(run_online_eval(ds, sf_stats(), {}, cfg), ValidationError);
  CHECK_THROWS_AS(run_online_eval(ds, sf_stats(), models_of({"csh", "csh"}), cfg), ValidationError);
  cfg.batch_size = 60;
  CHECK_THROWS_AS(run_online_eval(ds, sf_stats(), models_of({"csh"}), cfg), ValidationError);
  cfg.batch_size = 10;
  cfg.tau = 1.5;
  CHECK_THROWS_AS(run_online_eval(ds, sf_stats(), models_of({"csh"}), cfg), ValidationError);
}
