#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "roadwork/network.hpp"
#include "roadwork/tap.hpp"

namespace roadwork {

struct LabeledScenario {
  ClosureConfig config;
  double ttt = 0.0;
  double gap = 0.0;
  double solve_time = 0.0;  // seconds; 0 unless timing is recorded

  bool operator==(const LabeledScenario&) const = default;
};

struct SamplerOptions {
  int size_min = 1;
  int size_max = 10;
  // Candidate projects (link ids). Empty means every link of the network.
  std::vector<LinkId> projects;
  // Links listed here are partially closed (scaled) instead of removed.
  AdjustmentTable partial_closures;

  bool operator==(const SamplerOptions&) const = default;
};

struct Dataset {
  std::vector<LabeledScenario> scenarios;
  std::string network_fingerprint;
  std::uint64_t rng_seed = 0;
  SolverOptions solver;
  SamplerOptions sampler;
  double baseline_ttt = 0.0;

  bool operator==(const Dataset&) const = default;
};

using Rng = std::mt19937_64;

/// Uniform size in [size_min, size_max], then a uniform draw without replacement
/// from link ids 0..project_count-1.
ClosureConfig sample_closure_config(Rng& rng, int project_count, int size_min, int size_max);

// Same, drawing from an explicit candidate list.
ClosureConfig sample_closure_config(Rng& rng, std::span<const LinkId> projects, int size_min,
                                    int size_max);

enum class LabelStatus { ok, infeasible, not_converged };

struct LabelOutcome {
  LabelStatus status = LabelStatus::ok;
  LabeledScenario scenario;
  std::vector<std::pair<NodeIndex, NodeIndex>> disconnected;

  bool ok() const { return status == LabelStatus::ok; }
};

LabelOutcome label_scenario(const Network& network, const DemandMatrix& demand, const ClosureConfig& config,
                            const SolverOptions& opts, const AdjustmentTable& partial = {},
                            bool record_timing = false);

struct GenerateOptions {
  std::size_t n = 1;
  std::uint64_t seed = 0;
  SamplerOptions sampler;
  SolverOptions solver;
  int workers = 1;
  bool record_timing = false;
  // Total draws allowed, as a multiple of n (plus a constant floor).
  std::size_t retry_factor = 50;
  std::function<void(std::size_t accepted, std::size_t target)> progress;
};

/// Draws candidates from one seeded stream in a fixed order, labels each batch of
/// candidates on `workers` threads and accepts in draw order, so the result does
/// not depend on the worker count.
Dataset generate_dataset(const Network& network, const DemandMatrix& demand, const GenerateOptions& opts);

void save_dataset(const Dataset& dataset, std::ostream& sink);

/// Parses a dataset. When `expected_fingerprint` is given, a mismatch throws
/// FingerprintMismatch.
Dataset load_dataset(std::istream& source, const std::optional<std::string>& expected_fingerprint = {});

void save_dataset_file(const Dataset& dataset, const std::string& path);
Dataset load_dataset_file(const std::string& path,
                          const std::optional<std::string>& expected_fingerprint = {});

}  // namespace roadwork
