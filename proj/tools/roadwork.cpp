// roadwork: traffic assignment, closure datasets and surrogate evaluation.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <fmt/ranges.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "roadwork/config.hpp"
#include "roadwork/errors.hpp"
#include "roadwork/eval.hpp"
#include "roadwork/features.hpp"
#include "roadwork/json_io.hpp"
#include "roadwork/network.hpp"
#include "roadwork/scenario.hpp"
#include "roadwork/surrogates.hpp"
#include "roadwork/tap.hpp"

namespace fs = std::filesystem;
using namespace roadwork;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitInfeasible = 3;

struct CommonFlags {
  std::string config;
  std::string net;
  std::string trips;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

RunConfig load_config(const CommonFlags& flags) {
  RunConfig c = flags.config.empty() ? parse_run_config(json::object(), {}) : load_run_config(flags.config);
  if (!flags.net.empty()) c.net_path = flags.net;
  if (!flags.trips.empty()) c.trips_path = flags.trips;
  if (flags.workers) {
    if (*flags.workers < 1) throw ValidationError("workers must be >= 1");
    c.workers = *flags.workers;
  }
  if (flags.seed) c.seed = *flags.seed;
  c.sync_eval();
  return c;
}

TntpData load_network(const RunConfig& c) {
  if (c.net_path.empty() || c.trips_path.empty())
    throw ValidationError("network paths are required (--net/--trips or network.net/network.trips)");
  return load_tntp_files(c.net_path.string(), c.trips_path.string());
}

std::vector<LinkId> parse_id_list(const std::string& text) {
  std::vector<LinkId> ids;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ValidationError("bad link id '" + item + "' in --close");
    ids.push_back(v);
  }
  return ids;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_network = true) {
  cmd->add_option("-c,--config", flags.config, "JSON run config");
  if (with_network) {
    cmd->add_option("--net", flags.net, "TNTP link file (overrides network.net)");
    cmd->add_option("--trips", flags.trips, "TNTP trips file (overrides network.trips)");
  }
  cmd->add_option("--workers", flags.workers, "worker threads (overrides workers)");
  cmd->add_option("--seed", flags.seed, "master seed (overrides seed)");
}

BaselineStats baseline_stats(const TntpData& data, const RunConfig& c) {
  SolverOptions opts = c.solver;
  opts.threads = std::max(opts.threads, c.workers);
  const Equilibrium eq = solve_ue(data.network, data.demand, opts);
  if (!eq.converged)
    fmt::print(std::cerr, "warning: baseline solve stopped at gap {:.3g} after {} iterations\n", eq.relative_gap,
               eq.iterations);
  return compute_baseline_stats(data.network, eq, c.workers);
}

std::string hyperparameter_reference() {
  std::string out = "Model hyperparameters (defaults):\n";
  for (auto k : {ModelKind::log_ols, ModelKind::log_quantile, ModelKind::log_bayes_ridge, ModelKind::log_bagging,
                 ModelKind::log_knn, ModelKind::random_forest, ModelKind::gbt}) {
    out += fmt::format("  {:<16}", to_string(k));
    for (const auto& [key, v] : default_hyperparameters(k)) out += fmt::format(" {}={}", key, v);
    out += "\n";
  }
  return out;
}

// ---- solve ----

struct SolveFlags {
  CommonFlags common;
  std::string close;
  std::optional<double> gap;
  std::optional<int> max_iterations;
  std::string json_out;
};

int cmd_solve(const SolveFlags& flags) {
  RunConfig c = load_config(flags.common);
  if (flags.gap) c.solver.gap_tolerance = *flags.gap;
  if (flags.max_iterations) c.solver.max_iterations = *flags.max_iterations;
  c.solver.threads = std::max(c.solver.threads, c.workers);
  c.solver.validate();
  const TntpData data = load_network(c);
  const ClosureConfig closure(parse_id_list(flags.close));
  validate_closure(data.network, closure);
  const Network closed = apply_closures(data.network, closure, c.sampler.partial_closures);
  const auto missing = connectivity_check(closed, data.demand);
  if (!missing.empty()) {
    fmt::print(std::cerr, "infeasible closure {}: {} OD pairs lose every path\n", closure.to_string(),
               missing.size());
    for (const auto& [o, d] : missing)
      fmt::print(std::cerr, "  {} -> {}\n", closed.node_id(o), closed.node_id(d));
    return kExitInfeasible;
  }
  const Equilibrium eq = solve_ue(closed, data.demand, c.solver);
  fmt::print("closed      {}\n", closure.to_string());
  fmt::print("ttt         {:.6f}\n", eq.ttt);
  fmt::print("gap         {:.6e}\n", eq.relative_gap);
  fmt::print("iterations  {}\n", eq.iterations);
  fmt::print("converged   {}\n", eq.converged ? "yes" : "no");
  if (!flags.json_out.empty()) {
    json flows = json::array();
    for (const auto& l : closed.links()) flows.push_back({{"link", l.id}, {"flow", eq.flows[l.id]}});
    const json out{{"closed", closure.ids()},       {"ttt", eq.ttt},          {"relative_gap", eq.relative_gap},
                   {"iterations", eq.iterations},   {"converged", eq.converged},
                   {"fingerprint", fingerprint(data.network, data.demand)},
                   {"solver", to_json(c.solver)},   {"flows", flows}};
    std::ofstream f(flags.json_out);
    if (!f) throw std::runtime_error("cannot write " + flags.json_out);
    f << out.dump(2) << "\n";
  }
  return eq.converged ? kExitOk : kExitNotConverged;
}

// ---- generate ----

struct GenerateFlags {
  CommonFlags common;
  std::optional<long long> n;
  std::string out;
  bool record_timing = false;
};

int cmd_generate(const GenerateFlags& flags) {
  RunConfig c = load_config(flags.common);
  if (flags.n) {
    if (*flags.n < 1) throw ValidationError("n must be >= 1");
    c.n = static_cast<std::size_t>(*flags.n);
  }
  if (flags.record_timing) c.record_timing = true;
  if (!flags.out.empty()) c.dataset_path = flags.out;
  const TntpData data = load_network(c);

  GenerateOptions opts;
  opts.n = c.n;
  opts.seed = c.seed;
  opts.sampler = c.sampler;
  opts.solver = c.solver;
  opts.workers = c.workers;
  opts.record_timing = c.record_timing;
  std::size_t reported = 0;
  opts.progress = [&](std::size_t accepted, std::size_t target) {
    while (reported + 100 <= accepted) {
      reported += 100;
      fmt::print(std::cerr, "generated {}/{}\n", reported, target);
    }
  };
  const Dataset ds = generate_dataset(data.network, data.demand, opts);
  const fs::path path = c.resolved_dataset_path();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_dataset_file(ds, path.string());
  fmt::print("wrote {} scenarios to {}\n", ds.scenarios.size(), path.string());
  return kExitOk;
}

// ---- features ----

struct FeaturesFlags {
  CommonFlags common;
  std::string dataset;
  std::string out_dir;
  std::size_t k = 9;
};

int cmd_features(const FeaturesFlags& flags) {
  RunConfig c = load_config(flags.common);
  if (!flags.dataset.empty()) c.dataset_path = flags.dataset;
  if (!flags.out_dir.empty()) c.output_dir = flags.out_dir;
  const TntpData data = load_network(c);
  const Dataset ds = load_dataset_file(c.resolved_dataset_path().string(), fingerprint(data.network, data.demand));
  const BaselineStats stats = baseline_stats(data, c);
  const FeatureMatrix m = build_feature_matrix(ds, c.features, stats);
  fs::create_directories(c.output_dir);
  {
    std::ofstream f(c.output_dir / "features.csv");
    if (!f) throw std::runtime_error("cannot write " + (c.output_dir / "features.csv").string());
    m.write_csv(f);
  }

  std::vector<double> y;
  for (const auto& s : ds.scenarios) y.push_back(s.ttt);
  FeatureSpec engineered{Representation::engineered, {}, false};
  const FeatureMatrix e = build_feature_matrix(ds, engineered, stats);
  json report{{"schema_version", RunConfig::schema_version}, {"rows", ds.scenarios.size()}};
  for (auto [label, transform] : {std::pair{"identity", TargetTransform::identity}, {"log", TargetTransform::log}}) {
    json rows = json::array();
    for (const auto& r : pearson_screen(e, y, transform))
      rows.push_back({{"feature", r.feature}, {"r", r.degenerate ? json(nullptr) : json(r.r)}});
    report["correlation"][label] = rows;
  }
  SelectionOptions sel;
  sel.k = flags.k;
  sel.seed = c.seed;
  const auto forward = sequential_select(e, y, sel);
  sel.direction = SelectionDirection::backward;
  const auto backward = sequential_select(e, y, sel);
  report["selection"] = {{"k", flags.k}, {"forward", forward}, {"backward", backward}};
  {
    std::ofstream f(c.output_dir / "features_report.json");
    f << report.dump(2) << "\n";
  }
  fmt::print("{:<24} {:>10} {:>10}\n", "feature", "r", "r(log)");
  const auto& id = report["correlation"]["identity"];
  const auto& lg = report["correlation"]["log"];
  for (std::size_t i = 0; i < id.size(); ++i) {
    auto show = [](const json& v) { return v.is_null() ? std::string("n/a") : fmt::format("{:.4f}", v.get<double>()); };
    fmt::print("{:<24} {:>10} {:>10}\n", id[i]["feature"].get<std::string>(), show(id[i]["r"]), show(lg[i]["r"]));
  }
  fmt::print("forward selection:  {}\n", fmt::join(forward, ", "));
  fmt::print("backward selection: {}\n", fmt::join(backward, ", "));
  fmt::print("wrote {} and {}\n", (c.output_dir / "features.csv").string(),
             (c.output_dir / "features_report.json").string());
  return kExitOk;
}

// ---- evaluate ----

struct EvaluateFlags {
  CommonFlags common;
  std::string dataset;
  std::string out_dir;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> iterations;
  std::vector<std::string> models;
  std::string save_models;
  bool record_timing = false;
};

int cmd_evaluate(const EvaluateFlags& flags) {
  RunConfig c = load_config(flags.common);
  if (!flags.dataset.empty()) c.dataset_path = flags.dataset;
  if (!flags.out_dir.empty()) c.output_dir = flags.out_dir;
  if (flags.batch_size) c.eval.batch_size = *flags.batch_size;
  if (flags.iterations) c.eval.iterations = *flags.iterations;
  if (flags.record_timing) c.record_timing = true;
  if (!flags.models.empty()) {
    c.models.clear();
    for (const auto& m : flags.models) c.models.push_back(eval_model_from_name(m));
  }
  c.sync_eval();
  c.eval.validate();
  if (c.models.empty()) throw ValidationError("model list is empty");

  const TntpData data = load_network(c);
  const Dataset ds = load_dataset_file(c.resolved_dataset_path().string(), fingerprint(data.network, data.demand));
  const BaselineStats stats = baseline_stats(data, c);

  EvalHooks hooks;
  hooks.progress = [](std::size_t t, std::size_t total) { fmt::print(std::cerr, "iteration {}/{}\n", t + 1, total); };
  std::map<std::size_t, TrainedModel> last;
  if (!flags.save_models.empty())
    hooks.fitted = [&](std::size_t m, std::size_t, const TrainedModel& fitted) { last.insert_or_assign(m, fitted); };

  EvalReport report = run_online_eval(ds, stats, c.models, c.eval, hooks);
  report.config = config_echo(c);
  emit_report(report, c.output_dir);
  if (!flags.save_models.empty()) {
    fs::create_directories(flags.save_models);
    for (const auto& [m, fitted] : last) {
      std::ofstream f(fs::path(flags.save_models) / (c.models[m].name + ".json"));
      f << model_to_json(fitted).dump() << "\n";
    }
  }
  if (report.iterations_run < report.iterations_requested)
    fmt::print(std::cerr, "note: dataset supports only {} of {} iterations\n", report.iterations_run,
               report.iterations_requested);
  print_averages_table(report, std::cout);
  fmt::print("report written to {}\n", c.output_dir.string());
  return kExitOk;
}

// ---- report ----

struct ReportFlags {
  std::string input;
  std::string out_dir;
};

int cmd_report(const ReportFlags& flags) {
  const EvalReport report = load_report(flags.input);
  const fs::path dir = flags.out_dir.empty() ? fs::path(flags.input).parent_path() : fs::path(flags.out_dir);
  emit_report(report, dir.empty() ? fs::path(".") : dir);
  print_averages_table(report, std::cout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roadwork: traffic assignment under road closures and surrogate models of total travel time"};
  app.footer("\n" + config_reference() + "\n" + hyperparameter_reference() +
             "\nExit codes: 0 success, 1 error, 2 solver did not converge, 3 closure disconnects demand.");
  app.require_subcommand(1);

  SolveFlags solve;
  auto* solve_cmd = app.add_subcommand("solve", "Solve user equilibrium, optionally with closed links");
  add_common(solve_cmd, solve.common);
  solve_cmd->add_option("--close", solve.close, "comma-separated link ids to close (0-based, file order)");
  solve_cmd->add_option("--gap", solve.gap, "relative gap target");
  solve_cmd->add_option("--max-iter", solve.max_iterations, "iteration cap");
  solve_cmd->add_option("--json", solve.json_out, "write the equilibrium as JSON");

  GenerateFlags gen;
  auto* gen_cmd = app.add_subcommand("generate", "Label random closure scenarios into a JSON Lines dataset");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("-n,--n", gen.n, "scenario count (overrides sampler.n)");
  gen_cmd->add_option("-o,--out", gen.out, "dataset path (overrides dataset)");
  gen_cmd->add_flag("--record-timing", gen.record_timing, "store solve wall time per scenario");

  FeaturesFlags feat;
  auto* feat_cmd = app.add_subcommand("features", "Write the feature matrix with correlation and selection reports");
  add_common(feat_cmd, feat.common);
  feat_cmd->add_option("--dataset", feat.dataset, "dataset path (overrides dataset)");
  feat_cmd->add_option("-o,--output-dir", feat.out_dir, "output directory (overrides output_dir)");
  feat_cmd->add_option("-k", feat.k, "features to select")->check(CLI::PositiveNumber);

  EvaluateFlags ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Run the online evaluation and write a report");
  add_common(ev_cmd, ev.common);
  ev_cmd->add_option("--dataset", ev.dataset, "dataset path (overrides dataset)");
  ev_cmd->add_option("-o,--output-dir", ev.out_dir, "report directory (overrides output_dir)");
  ev_cmd->add_option("--batch-size", ev.batch_size, "rows per iteration (overrides eval.batch_size)");
  ev_cmd->add_option("--iterations", ev.iterations, "iterations (overrides eval.iterations)");
  ev_cmd->add_option("--models", ev.models, "model names (overrides models)")->delimiter(',');
  ev_cmd->add_option("--save-models", ev.save_models, "directory for the last fitted model of each kind");
  ev_cmd->add_flag("--record-timing", ev.record_timing, "write wall-clock seconds into the report");

  ReportFlags rep;
  auto* rep_cmd = app.add_subcommand("report", "Re-render CSV and SVG outputs from a saved report.json");
  rep_cmd->add_option("input", rep.input, "report.json")->required();
  rep_cmd->add_option("-o,--output-dir", rep.out_dir, "output directory (default: next to the input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (*solve_cmd) return cmd_solve(solve);
    if (*gen_cmd) return cmd_generate(gen);
    if (*feat_cmd) return cmd_features(feat);
    if (*ev_cmd) return cmd_evaluate(ev);
    if (*rep_cmd) return cmd_report(rep);
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return kExitError;
  }
  return kExitError;
}
