#include "roadwork/scenario.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "roadwork/json_io.hpp"

namespace roadwork {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ValidationError(std::string(where) + ": unknown key '" + key + "'");
  }
}

json to_json(const SolverOptions& opts) {
  return {{"gap_tolerance", opts.gap_tolerance},
          {"max_iterations", opts.max_iterations},
          {"line_search_tolerance", opts.line_search_tolerance}};
}

SolverOptions solver_options_from_json(const json& j) {
  reject_unknown_keys(j, {"gap_tolerance", "max_iterations", "line_search_tolerance", "threads"}, "solver");
  SolverOptions o;
  o.gap_tolerance = j.value("gap_tolerance", o.gap_tolerance);
  o.max_iterations = j.value("max_iterations", o.max_iterations);
  o.line_search_tolerance = j.value("line_search_tolerance", o.line_search_tolerance);
  o.threads = j.value("threads", o.threads);
  o.validate();
  return o;
}

json to_json(const SamplerOptions& opts) {
  json partial = json::object();
  for (const auto& [id, adj] : opts.partial_closures)
    partial[std::to_string(id)] = {{"capacity_factor", adj.capacity_factor}, {"fft_factor", adj.fft_factor}};
  return {{"size_min", opts.size_min},
          {"size_max", opts.size_max},
          {"projects", opts.projects},
          {"partial_closures", partial}};
}

SamplerOptions sampler_options_from_json(const json& j) {
  reject_unknown_keys(j, {"size_min", "size_max", "projects", "partial_closures"}, "sampler");
  SamplerOptions o;
  o.size_min = j.value("size_min", o.size_min);
  o.size_max = j.value("size_max", o.size_max);
  if (j.contains("projects")) o.projects = j.at("projects").get<std::vector<LinkId>>();
  if (j.contains("partial_closures")) {
    for (const auto& [key, v] : j.at("partial_closures").items()) {
      reject_unknown_keys(v, {"capacity_factor", "fft_factor"}, "sampler.partial_closures");
      LinkAdjustment adj;
      adj.capacity_factor = v.value("capacity_factor", 1.0);
      adj.fft_factor = v.value("fft_factor", 1.0);
      if (!(adj.capacity_factor > 0.0) || !(adj.fft_factor > 0.0))
        throw ValidationError("partial closure factors must be > 0");
      o.partial_closures[std::stoi(key)] = adj;
    }
  }
  return o;
}

ClosureConfig sample_closure_config(Rng& rng, std::span<const LinkId> projects, int size_min,
                                    int size_max) {
  const int count = static_cast<int>(projects.size());
  if (size_min < 0 || size_min > size_max || size_max > count)
    throw ValidationError("invalid closure size range [" + std::to_string(size_min) + "," +
                          std::to_string(size_max) + "] for " + std::to_string(count) + " projects");
  const int size = std::uniform_int_distribution<int>(size_min, size_max)(rng);
  std::vector<LinkId> pool(projects.begin(), projects.end());
  for (int i = 0; i < size; ++i) {
    const int j = std::uniform_int_distribution<int>(i, count - 1)(rng);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(size);
  return ClosureConfig(std::move(pool));
}

ClosureConfig sample_closure_config(Rng& rng, int project_count, int size_min, int size_max) {
  if (project_count < 0) throw ValidationError("project_count must be >= 0");
  std::vector<LinkId> ids(project_count);
  std::iota(ids.begin(), ids.end(), 0);
  return sample_closure_config(rng, ids, size_min, size_max);
}

LabelOutcome label_scenario(const Network& network, const DemandMatrix& demand, const ClosureConfig& config,
                            const SolverOptions& opts, const AdjustmentTable& partial, bool record_timing) {
  const auto start = std::chrono::steady_clock::now();
  LabelOutcome out;
  out.scenario.config = config;
  const Network closed = apply_closures(network, config, partial);
  out.disconnected = connectivity_check(closed, demand);
  if (!out.disconnected.empty()) {
    out.status = LabelStatus::infeasible;
    return out;
  }
  const Equilibrium eq = solve_ue(closed, demand, opts);
  out.scenario.ttt = eq.ttt;
  out.scenario.gap = eq.relative_gap;
  if (record_timing)
    out.scenario.solve_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.status = eq.converged ? LabelStatus::ok : LabelStatus::not_converged;
  return out;
}

Dataset generate_dataset(const Network& network, const DemandMatrix& demand, const GenerateOptions& opts) {
  if (opts.n < 1) throw ValidationError("n must be >= 1");
  if (opts.workers < 1) throw ValidationError("workers must be >= 1");
  opts.solver.validate();

  std::vector<LinkId> projects = opts.sampler.projects;
  if (projects.empty())
    for (const auto& l : network.links()) projects.push_back(l.id);
  validate_closure(network, ClosureConfig(projects));

  Dataset ds;
  ds.network_fingerprint = fingerprint(network, demand);
  ds.rng_seed = opts.seed;
  ds.solver = opts.solver;
  ds.sampler = opts.sampler;

  SolverOptions solver = opts.solver;
  solver.threads = 1;
  const auto baseline = label_scenario(network, demand, {}, solver);
  if (baseline.status == LabelStatus::infeasible)
    throw DisconnectedError("baseline network leaves OD pairs disconnected");
  ds.baseline_ttt = baseline.scenario.ttt;

  Rng rng(opts.seed);
  std::set<ClosureConfig> drawn;
  const std::size_t budget = opts.retry_factor * opts.n + 1000;
  std::size_t draws = 0;

  while (ds.scenarios.size() < opts.n) {
    const std::size_t need = opts.n - ds.scenarios.size();
    std::vector<ClosureConfig> batch;
    while (batch.size() < need) {
      if (draws++ >= budget)
        throw std::runtime_error("sampler exhausted: found " + std::to_string(ds.scenarios.size()) +
                                 " of " + std::to_string(opts.n) + " unique feasible configurations after " +
                                 std::to_string(budget) + " draws");
      auto cfg = sample_closure_config(rng, projects, opts.sampler.size_min, opts.sampler.size_max);
      if (drawn.insert(cfg).second) batch.push_back(std::move(cfg));
    }

    std::vector<LabelOutcome> outcomes(batch.size());
    std::exception_ptr failure;
    const int count = static_cast<int>(batch.size());
#pragma omp parallel for num_threads(opts.workers) schedule(dynamic)
    for (int i = 0; i < count; ++i) {
      try {
        outcomes[i] = label_scenario(network, demand, batch[i], solver, opts.sampler.partial_closures,
                                     opts.record_timing);
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);

    for (auto& o : outcomes) {
      if (!o.ok()) continue;
      ds.scenarios.push_back(std::move(o.scenario));
      const auto accepted = ds.scenarios.size();
      if (opts.progress && (accepted % 100 == 0 || accepted == opts.n)) opts.progress(accepted, opts.n);
    }
  }
  return ds;
}

namespace {

constexpr int kDatasetSchemaVersion = 1;

}  // namespace

void save_dataset(const Dataset& dataset, std::ostream& sink) {
  json header = {{"kind", "roadwork.dataset"},
                 {"schema_version", kDatasetSchemaVersion},
                 {"fingerprint", dataset.network_fingerprint},
                 {"seed", dataset.rng_seed},
                 {"solver", to_json(dataset.solver)},
                 {"sampler", to_json(dataset.sampler)},
                 {"baseline_ttt", dataset.baseline_ttt},
                 {"count", dataset.scenarios.size()}};
  sink << header.dump() << '\n';
  for (const auto& s : dataset.scenarios) {
    json row = {{"closed", s.config.ids()}, {"ttt", s.ttt}, {"gap", s.gap}, {"solve_time", s.solve_time}};
    sink << row.dump() << '\n';
  }
}

Dataset load_dataset(std::istream& source, const std::optional<std::string>& expected_fingerprint) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t declared = 0;
  std::set<ClosureConfig> seen;
  while (std::getline(source, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    try {
      if (!have_header) {
        if (j.value("kind", "") != "roadwork.dataset") throw ParseError("missing dataset header", line_no);
        if (j.at("schema_version").get<int>() != kDatasetSchemaVersion)
          throw ParseError("unsupported dataset schema version", line_no);
        ds.network_fingerprint = j.at("fingerprint").get<std::string>();
        ds.rng_seed = j.at("seed").get<std::uint64_t>();
        ds.solver = solver_options_from_json(j.at("solver"));
        ds.sampler = sampler_options_from_json(j.at("sampler"));
        ds.baseline_ttt = j.at("baseline_ttt").get<double>();
        declared = j.value("count", std::size_t{0});
        have_header = true;
        if (expected_fingerprint && *expected_fingerprint != ds.network_fingerprint)
          throw FingerprintMismatch("dataset fingerprint " + ds.network_fingerprint +
                                    " does not match network fingerprint " + *expected_fingerprint);
        continue;
      }
      reject_unknown_keys(j, {"closed", "ttt", "gap", "solve_time"}, "scenario");
      LabeledScenario s;
      s.config = ClosureConfig(j.at("closed").get<std::vector<LinkId>>());
      s.ttt = j.at("ttt").get<double>();
      s.gap = j.at("gap").get<double>();
      s.solve_time = j.value("solve_time", 0.0);
      if (!(s.ttt > 0.0)) throw ParseError("ttt must be > 0", line_no);
      if (!seen.insert(s.config).second) throw ParseError("duplicate configuration " + s.config.to_string(), line_no);
      ds.scenarios.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("empty dataset file (no header)");
  if (declared != ds.scenarios.size())
    throw ParseError("header declares " + std::to_string(declared) + " scenarios, found " +
                     std::to_string(ds.scenarios.size()));
  return ds;
}

void save_dataset_file(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  save_dataset(dataset, out);
}

Dataset load_dataset_file(const std::string& path, const std::optional<std::string>& expected_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  return load_dataset(in, expected_fingerprint);
}

}  // namespace roadwork
