#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "roadwork/features.hpp"
#include "roadwork/scenario.hpp"
#include "roadwork/surrogates.hpp"

namespace roadwork {

struct Metrics {
  double mae = 0.0;
  double pinball = 0.0;
  double bias = 0.0;  // mean(prediction - truth)
  double mape = 0.0;  // percent

  bool operator==(const Metrics&) const = default;
};

Metrics compute_metrics(std::span<const double> truth, std::span<const double> predicted, double tau);

enum class HeuristicKind { costliest_subset, additive_subset, cheapest_superset };

/// One competitor in the online evaluation: a subset heuristic or a regression model.
struct EvalModel {
  std::string name;
  std::variant<HeuristicKind, ModelSpec> method;

  bool is_heuristic() const { return std::holds_alternative<HeuristicKind>(method); }
};

std::string display_name(HeuristicKind kind);
std::string display_name(ModelKind kind);

/// Accepts heuristic short names (csh, cash, csuph), display names
/// (CostliestSubset, LogOLS, GBT, ...) and model kind names (log_ols, gbt, ...).
EvalModel eval_model_from_name(const std::string& name);

struct EvalConfig {
  std::size_t batch_size = 200;
  std::size_t iterations = 20;
  double tau = 0.05;
  double time_cap_seconds = 600.0;
  std::size_t time_cap_window = 10;
  std::uint64_t seed = 0;
  int workers = 1;
  // Wall-clock seconds go into the records only when set; otherwise they are written as 0.
  bool record_timing = false;
  FeatureSpec features;

  void validate() const;
};

struct IterationRecord {
  std::size_t iteration = 0;
  std::string model;
  std::size_t train_rows = 0;
  Metrics metrics;
  double seconds = 0.0;
  bool terminated = false;  // the time cap tripped after this iteration

  bool operator==(const IterationRecord&) const = default;
};

struct ModelAverages {
  std::string model;
  std::size_t iterations = 0;
  Metrics mean;
  double seconds = 0.0;
  bool terminated = false;
  // Iterations whose MAPE exceeds 10x the model's median MAPE are dropped.
  std::size_t filtered_iterations = 0;
  Metrics filtered;

  bool operator==(const ModelAverages&) const = default;
};

struct EvalReport {
  static constexpr int schema_version = 1;

  std::vector<std::string> models;
  std::size_t iterations_requested = 0;
  std::size_t iterations_run = 0;
  std::vector<IterationRecord> records;
  std::vector<ModelAverages> averages;
  nlohmann::json config;  // echo of the run configuration
  std::string dataset_fingerprint;
  std::string revision;

  bool operator==(const EvalReport&) const = default;
};

struct EvalHooks {
  // Replaces the measured fit+predict seconds of (model, iteration) for the time cap.
  std::function<double(std::size_t model, std::size_t iteration, double measured)> timing;
  // Conservative predictions of the test batch.
  std::function<void(std::size_t model, std::size_t iteration, std::span<const double> predictions)> predictions;
  std::function<void(std::size_t model, std::size_t iteration, const TrainedModel& fitted)> fitted;
  std::function<void(std::size_t iteration, std::size_t total)> progress;
};

// Median of the trailing `window` entries (fewer when not enough) exceeds `cap`.
bool time_cap_exceeded(std::span<const double> seconds, std::size_t window, double cap);

/// Iteration t trains every live model on rows [0, tB) and scores conservative
/// predictions on rows [tB, (t+1)B). Iterations are truncated to the data available.
EvalReport run_online_eval(const Dataset& dataset, const BaselineStats& stats, const std::vector<EvalModel>& models,
                           const EvalConfig& config, const EvalHooks& hooks = {});

std::vector<ModelAverages> compute_averages(const std::vector<std::string>& models,
                                            const std::vector<IterationRecord>& records);

std::string revision_string();

void write_iterations_csv(const EvalReport& report, std::ostream& out);
void write_averages_csv(const EvalReport& report, std::ostream& out);
std::string render_pinball_svg(const EvalReport& report);
void print_averages_table(const EvalReport& report, std::ostream& out);

nlohmann::json report_to_json(const EvalReport& report);
// Throws ValidationError when the stored averages disagree with the records by more than 1e-9.
EvalReport report_from_json(const nlohmann::json& j);

/// Writes iterations.csv, averages.csv, pinball.svg and report.json into `dir`.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);
EvalReport load_report(const std::filesystem::path& path);

}  // namespace roadwork
