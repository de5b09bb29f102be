#pragma once

// The desk-scale Sioux Falls dataset shared by the acceptance and ordering checks.
// Labeling takes a few minutes, so a copy is kept next to the test binaries and
// reused when its header matches.

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "roadwork/features.hpp"
#include "roadwork/scenario.hpp"
#include "support.hpp"

namespace roadwork::testing {

constexpr std::size_t kDeskRows = 4000;
constexpr std::uint64_t kDeskSeed = 2024;

inline Dataset desk_dataset(const std::filesystem::path& cache) {
  const auto& sf = sioux_falls();
  const std::string fp = fingerprint(sf.network, sf.demand);
  GenerateOptions opts;
  opts.n = kDeskRows;
  opts.seed = kDeskSeed;
  opts.workers = omp_get_max_threads();
  if (std::filesystem::exists(cache)) {
    try {
      Dataset ds = load_dataset_file(cache.string(), fp);
      if (ds.rng_seed == opts.seed && ds.scenarios.size() == opts.n && ds.solver == opts.solver &&
          ds.sampler == opts.sampler)
        return ds;
    } catch (const std::exception& e) {
      std::cerr << "ignoring dataset cache: " << e.what() << "\n";
    }
  }
  std::cerr << "labeling " << opts.n << " desk scenarios...\n";
  Dataset ds = generate_dataset(sf.network, sf.demand, opts);
  save_dataset_file(ds, cache.string());
  return ds;
}

inline BaselineStats sioux_falls_stats() {
  const auto& sf = sioux_falls();
  const Equilibrium eq = solve_ue(sf.network, sf.demand);
  return compute_baseline_stats(sf.network, eq, omp_get_max_threads());
}

}  // namespace roadwork::testing
