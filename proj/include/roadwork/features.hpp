#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "roadwork/heuristics.hpp"
#include "roadwork/network.hpp"
#include "roadwork/scenario.hpp"
#include "roadwork/tap.hpp"

namespace roadwork {

/// Row-major matrix of named feature columns.
struct FeatureMatrix {
  std::vector<std::string> columns;
  std::size_t rows = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::vector<std::string> names, std::size_t row_count);

  std::size_t cols() const { return columns.size(); }
  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * cols(), cols());
  }
  std::vector<double> column(std::size_t c) const;
  std::optional<std::size_t> find(const std::string& name) const;

  FeatureMatrix select_rows(std::size_t begin, std::size_t end) const;
  FeatureMatrix select_columns(std::span<const std::string> names) const;

  // Throws ValidationError on duplicate names or non-finite values.
  void validate() const;
  void write_csv(std::ostream& out) const;

  bool operator==(const FeatureMatrix&) const = default;
};

enum class Representation { one_hot, pairwise, engineered, combined };

Representation representation_from_string(const std::string& name);
std::string to_string(Representation r);

struct FeatureSpec {
  Representation representation = Representation::combined;
  // Engineered columns to keep; empty means the full registry.
  std::vector<std::string> selected;
  bool include_csh = true;
};

/// Per-link quantities measured on the baseline network, indexed by link id.
struct BaselineStats {
  std::size_t project_count = 0;
  double baseline_ttt = 0.0;
  std::vector<double> flow;
  std::vector<double> cost;
  std::vector<double> betweenness;  // FFT-weighted edge betweenness
  std::vector<double> closeness;    // mean of endpoint node closeness
  std::vector<double> fft;
  std::vector<double> capacity;
};

/// Edge betweenness (Brandes) over all ordered node pairs, FFT-weighted.
/// Serial reference and OpenMP kernel; the parallel kernel reduces per-source
/// contributions in source order.
std::vector<double> edge_betweenness_serial(const Network& network);
std::vector<double> edge_betweenness_parallel(const Network& network, int threads);

// Outbound closeness per node with the Wasserman-Faust correction for unreachable nodes.
std::vector<double> node_closeness(const Network& network);

BaselineStats compute_baseline_stats(const Network& network, const Equilibrium& baseline, int threads = 1);

std::vector<double> one_hot(const ClosureConfig& config, std::size_t project_count);
std::vector<double> pairwise_encode(const ClosureConfig& config, std::size_t project_count);

/// Names of the engineered-feature registry, in column order.
const std::vector<std::string>& engineered_feature_names();
std::vector<double> engineered_features(const ClosureConfig& config, const BaselineStats& stats);

struct Correlation {
  std::string feature;
  double r = 0.0;
  bool degenerate = false;
};

enum class TargetTransform { identity, log };

std::vector<Correlation> pearson_screen(const FeatureMatrix& matrix, std::span<const double> targets,
                                        TargetTransform transform);

enum class SelectionDirection { forward, backward };

struct SelectionOptions {
  SelectionDirection direction = SelectionDirection::forward;
  std::size_t k = 9;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
};

/// Greedy wrapper selection scored by cross-validated R^2 of OLS on log targets.
std::vector<std::string> sequential_select(const FeatureMatrix& matrix, std::span<const double> targets,
                                           const SelectionOptions& opts);

// Out-of-fold R^2 of OLS on log targets using the given columns.
double cross_validated_r2(const FeatureMatrix& matrix, std::span<const double> log_targets,
                          std::span<const std::size_t> columns, std::size_t folds, std::uint64_t seed);

std::vector<std::string> feature_columns(const FeatureSpec& spec, std::size_t project_count);

/// Builds features for `rows`. The CSH column of row i is computed against
/// `prior` plus, when `grow_index` is set, the rows before i; never row i or later.
FeatureMatrix build_feature_matrix(std::span<const LabeledScenario> rows, const FeatureSpec& spec,
                                   const BaselineStats& stats, const SubsetIndex* prior = nullptr,
                                   bool grow_index = true);

// Whole-dataset features; a null `prior` means an index holding only the baseline.
FeatureMatrix build_feature_matrix(const Dataset& dataset, const FeatureSpec& spec, const BaselineStats& stats,
                                   const SubsetIndex* prior = nullptr);

}  // namespace roadwork
