#pragma once

#include <map>
#include <optional>
#include <vector>

#include "roadwork/network.hpp"
#include "roadwork/scenario.hpp"

namespace roadwork {

/// Evaluated closure configurations with a per-link inverted index for subset and
/// superset lookups. The empty configuration holds the baseline TTT.
class SubsetIndex {
 public:
  struct Entry {
    ClosureConfig config;
    double ttt = 0.0;
  };

  SubsetIndex() = default;
  explicit SubsetIndex(double baseline_ttt) { insert(ClosureConfig{}, baseline_ttt); }

  // Keeps the first label seen for a configuration. Returns false on duplicates.
  bool insert(const ClosureConfig& config, double ttt);
  bool insert(const LabeledScenario& scenario) { return insert(scenario.config, scenario.ttt); }

  bool has_baseline() const { return baseline_.has_value(); }
  double baseline() const;
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::optional<double> lookup(const ClosureConfig& config) const;

  // Entry ids that contain `link`.
  const std::vector<int>& containing(LinkId link) const;

  // Indexed configurations contained in `query` (the baseline included).
  std::vector<int> subsets_of(const ClosureConfig& query) const;
  // Indexed configurations containing `query`.
  std::vector<int> supersets_of(const ClosureConfig& query) const;

 private:
  std::vector<Entry> entries_;
  std::map<ClosureConfig, int> by_config_;
  std::vector<std::vector<int>> inverted_;
  std::optional<double> baseline_;
  int baseline_entry_ = -1;
};

/// Costliest indexed subset of `query`; ties prefer the smaller, then
/// lexicographically first, configuration. Returns the empty set when only the
/// baseline qualifies.
ClosureConfig argmax_subset(const SubsetIndex& index, const ClosureConfig& query);

// Costliest subset heuristic.
double csh(const SubsetIndex& index, const ClosureConfig& query);

// Costliest additive subset: csh(A*) + csh(query \ A*) - y(empty).
double cash(const SubsetIndex& index, const ClosureConfig& query);

// Cheapest superset heuristic; nullopt when no indexed superset exists.
std::optional<double> csuph(const SubsetIndex& index, const ClosureConfig& query);

}  // namespace roadwork
