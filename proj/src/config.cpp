#include "roadwork/config.hpp"

#include <fstream>

#include "roadwork/errors.hpp"
#include "roadwork/json_io.hpp"

namespace roadwork {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path RunConfig::resolved_dataset_path() const {
  return dataset_path.empty() ? output_dir / "dataset.jsonl" : dataset_path;
}

void RunConfig::sync_eval() {
  eval.seed = seed;
  eval.workers = workers;
  eval.record_timing = record_timing;
  eval.features = features;
}

namespace {

template <class T>
T get_as(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + "." + key + ": wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

EvalModel parse_model(const json& j, std::size_t position) {
  const std::string where = "models[" + std::to_string(position) + "]";
  if (j.is_string()) return eval_model_from_name(j.get<std::string>());
  reject_unknown_keys(j, {"kind", "name", "hyperparameters"}, where);
  if (!j.contains("kind")) throw ValidationError(where + ": missing 'kind'");
  EvalModel m = eval_model_from_name(get_as<std::string>(j, "kind", where));
  if (j.contains("name")) m.name = get_as<std::string>(j, "name", where);
  if (j.contains("hyperparameters")) {
    auto* spec = std::get_if<ModelSpec>(&m.method);
    if (!spec) throw ValidationError(where + ": heuristics take no hyperparameters");
    spec->hyperparameters = get_as<Hyperparameters>(j, "hyperparameters", where);
    resolve_hyperparameters(*spec);
  }
  return m;
}

json model_echo(const EvalModel& m) {
  json out{{"name", m.name}};
  if (const auto* spec = std::get_if<ModelSpec>(&m.method)) {
    out["kind"] = to_string(spec->kind);
    out["hyperparameters"] = resolve_hyperparameters(*spec);
  } else {
    switch (std::get<HeuristicKind>(m.method)) {
      case HeuristicKind::costliest_subset: out["kind"] = "csh"; break;
      case HeuristicKind::additive_subset: out["kind"] = "cash"; break;
      case HeuristicKind::cheapest_superset: out["kind"] = "csuph"; break;
    }
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
  reject_unknown_keys(j,
                      {"schema_version", "network", "solver", "sampler", "features", "models", "eval", "output_dir",
                       "dataset", "seed", "workers", "record_timing"},
                      "config");
  RunConfig c;
  try {
    const int version = j.value("schema_version", RunConfig::schema_version);
    if (version != RunConfig::schema_version)
      throw ValidationError("config: unsupported schema_version " + std::to_string(version));

    if (j.contains("network")) {
      const json& net = j.at("network");
      reject_unknown_keys(net, {"net", "trips"}, "network");
      if (net.contains("net")) c.net_path = resolve(base_dir, get_as<std::string>(net, "net", "network"));
      if (net.contains("trips")) c.trips_path = resolve(base_dir, get_as<std::string>(net, "trips", "network"));
    }
    if (j.contains("solver")) c.solver = solver_options_from_json(j.at("solver"));
    if (j.contains("sampler")) {
      json sampler = j.at("sampler");
      if (!sampler.is_object()) throw ValidationError("sampler: expected an object");
      if (sampler.contains("n")) {
        const auto n = get_as<long long>(sampler, "n", "sampler");
        if (n < 1) throw ValidationError("n must be >= 1");
        c.n = static_cast<std::size_t>(n);
        sampler.erase("n");
      }
      c.sampler = sampler_options_from_json(sampler);
    }
    if (j.contains("features")) {
      const json& f = j.at("features");
      reject_unknown_keys(f, {"representation", "selected", "include_csh"}, "features");
      if (f.contains("representation"))
        c.features.representation = representation_from_string(get_as<std::string>(f, "representation", "features"));
      if (f.contains("selected")) c.features.selected = get_as<std::vector<std::string>>(f, "selected", "features");
      if (f.contains("include_csh")) c.features.include_csh = get_as<bool>(f, "include_csh", "features");
      feature_columns(c.features, 1);
    }
    if (j.contains("models")) {
      const json& models = j.at("models");
      if (!models.is_array()) throw ValidationError("models: expected an array");
      for (std::size_t i = 0; i < models.size(); ++i) c.models.push_back(parse_model(models[i], i));
    }
    if (j.contains("eval")) {
      const json& e = j.at("eval");
      reject_unknown_keys(e, {"batch_size", "iterations", "tau", "time_cap_seconds", "time_cap_window"}, "eval");
      auto count = [&](const char* key, std::size_t& slot) {
        if (!e.contains(key)) return;
        const auto v = get_as<long long>(e, key, "eval");
        if (v < 1) throw ValidationError(std::string("eval.") + key + " must be >= 1");
        slot = static_cast<std::size_t>(v);
      };
      count("batch_size", c.eval.batch_size);
      count("iterations", c.eval.iterations);
      count("time_cap_window", c.eval.time_cap_window);
      if (e.contains("tau")) c.eval.tau = get_as<double>(e, "tau", "eval");
      if (e.contains("time_cap_seconds")) c.eval.time_cap_seconds = get_as<double>(e, "time_cap_seconds", "eval");
    }
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, get_as<std::string>(j, "output_dir", "config"));
    if (j.contains("dataset")) c.dataset_path = resolve(base_dir, get_as<std::string>(j, "dataset", "config"));
    if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed", "config");
    if (j.contains("workers")) {
      c.workers = get_as<int>(j, "workers", "config");
      if (c.workers < 1) throw ValidationError("workers must be >= 1");
    }
    if (j.contains("record_timing")) c.record_timing = get_as<bool>(j, "record_timing", "config");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.sync_eval();
  c.eval.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

json config_echo(const RunConfig& c) {
  json sampler = to_json(c.sampler);
  sampler["n"] = c.n;
  json models = json::array();
  for (const auto& m : c.models) models.push_back(model_echo(m));
  return {{"schema_version", RunConfig::schema_version},
          {"solver", to_json(c.solver)},
          {"sampler", sampler},
          {"features",
           {{"representation", to_string(c.features.representation)},
            {"selected", c.features.selected},
            {"include_csh", c.features.include_csh}}},
          {"models", models},
          {"eval",
           {{"batch_size", c.eval.batch_size},
            {"iterations", c.eval.iterations},
            {"tau", c.eval.tau},
            {"time_cap_seconds", c.eval.time_cap_seconds},
            {"time_cap_window", c.eval.time_cap_window}}},
          {"seed", c.seed},
          {"record_timing", c.record_timing}};
}

const std::string& config_reference() {
  static const std::string text = R"(Config file (JSON). Unknown keys are rejected at every level.
Relative paths resolve against the config file's directory. CLI flags override config values.

  schema_version            1
  network.net               TNTP link file
  network.trips             TNTP trips file
  solver.gap_tolerance      relative gap target (default 1e-4)
  solver.max_iterations     Frank-Wolfe iteration cap (default 5000)
  solver.line_search_tolerance  bisection width (default 1e-8)
  solver.threads            threads for all-or-nothing loading (default 1)
  sampler.n                 scenarios to generate (default 1000, must be >= 1)
  sampler.size_min          smallest closure set (default 1)
  sampler.size_max          largest closure set (default 10)
  sampler.projects          candidate link ids (default: every link)
  sampler.partial_closures  {"<link id>": {"capacity_factor": x, "fft_factor": y}}
  features.representation   one_hot | pairwise | engineered | combined (default combined)
  features.selected         engineered columns to keep (default: all)
  features.include_csh      append the costliest-subset column (default true)
  models                    list of names or {"kind", "name", "hyperparameters"} objects;
                            kinds: csh cash csuph log_ols log_quantile log_bayes_ridge
                            log_bagging log_knn random_forest gbt
  eval.batch_size           rows added per iteration (default 200)
  eval.iterations           online iterations (default 20)
  eval.tau                  conservative quantile (default 0.05)
  eval.time_cap_seconds     per-model cap on median fit+predict time (default 600)
  eval.time_cap_window      trailing iterations in that median (default 10)
  output_dir                report directory (default out)
  dataset                   dataset path (default <output_dir>/dataset.jsonl)
  seed                      master seed (default 0)
  workers                   worker threads (default 1; results do not depend on it)
  record_timing             write wall-clock seconds into outputs (default false)
)";
  return text;
}

}  // namespace roadwork
