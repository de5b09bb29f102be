#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "roadwork/eval.hpp"
#include "roadwork/features.hpp"
#include "roadwork/scenario.hpp"
#include "roadwork/tap.hpp"

namespace roadwork {

/// One experiment: network, sampler, features, models and evaluation settings.
/// Relative paths are resolved against the directory holding the config file.
struct RunConfig {
  static constexpr int schema_version = 1;

  std::filesystem::path net_path;
  std::filesystem::path trips_path;
  SolverOptions solver;
  SamplerOptions sampler;
  std::size_t n = 1000;
  FeatureSpec features;
  std::vector<EvalModel> models;
  EvalConfig eval;
  std::filesystem::path output_dir = "out";
  std::filesystem::path dataset_path;  // empty means <output_dir>/dataset.jsonl
  std::uint64_t seed = 0;
  int workers = 1;
  bool record_timing = false;

  std::filesystem::path resolved_dataset_path() const;
  // Copies seed, workers, timing and features into the eval block.
  void sync_eval();
};

// Throws ValidationError on unknown keys, wrong types or invalid values.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Settings that determine results; paths, worker count and output location are
/// left out so that outputs compare equal across machines and thread counts.
nlohmann::json config_echo(const RunConfig& config);

// Human-readable reference of every config key.
const std::string& config_reference();

}  // namespace roadwork
