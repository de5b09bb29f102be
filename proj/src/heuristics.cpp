#include "roadwork/heuristics.hpp"

#include <algorithm>

namespace roadwork {

bool SubsetIndex::insert(const ClosureConfig& config, double ttt) {
  if (by_config_.contains(config)) return false;
  const int id = static_cast<int>(entries_.size());
  entries_.push_back({config, ttt});
  by_config_.emplace(config, id);
  if (config.empty()) {
    baseline_ = ttt;
    baseline_entry_ = id;
  }
  for (LinkId l : config.ids()) {
    if (static_cast<std::size_t>(l) >= inverted_.size()) inverted_.resize(l + 1);
    inverted_[l].push_back(id);
  }
  return true;
}

double SubsetIndex::baseline() const {
  if (!baseline_) throw std::logic_error("subset index has no baseline entry");
  return *baseline_;
}

std::optional<double> SubsetIndex::lookup(const ClosureConfig& config) const {
  auto it = by_config_.find(config);
  if (it == by_config_.end()) return std::nullopt;
  return entries_[it->second].ttt;
}

const std::vector<int>& SubsetIndex::containing(LinkId link) const {
  static const std::vector<int> none;
  if (link < 0 || static_cast<std::size_t>(link) >= inverted_.size()) return none;
  return inverted_[link];
}

std::vector<int> SubsetIndex::subsets_of(const ClosureConfig& query) const {
  std::vector<int> candidates;
  for (LinkId l : query.ids()) {
    const auto& c = containing(l);
    candidates.insert(candidates.end(), c.begin(), c.end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::erase_if(candidates, [&](int id) { return !entries_[id].config.is_subset_of(query); });
  if (baseline_entry_ >= 0) candidates.insert(candidates.begin(), baseline_entry_);
  return candidates;
}

std::vector<int> SubsetIndex::supersets_of(const ClosureConfig& query) const {
  std::vector<int> out;
  if (query.empty()) {
    out.resize(entries_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
    return out;
  }
  const std::vector<int>* shortest = nullptr;
  for (LinkId l : query.ids()) {
    const auto& c = containing(l);
    if (!shortest || c.size() < shortest->size()) shortest = &c;
  }
  for (int id : *shortest)
    if (query.is_subset_of(entries_[id].config)) out.push_back(id);
  return out;
}

namespace {

// Strict ordering for "better costliest subset": higher ttt, then smaller, then lexicographic.
bool beats(const SubsetIndex::Entry& a, const SubsetIndex::Entry& b) {
  if (a.ttt != b.ttt) return a.ttt > b.ttt;
  if (a.config.size() != b.config.size()) return a.config.size() < b.config.size();
  return a.config < b.config;
}

}  // namespace

ClosureConfig argmax_subset(const SubsetIndex& index, const ClosureConfig& query) {
  index.baseline();
  const auto& entries = index.entries();
  const SubsetIndex::Entry* best = nullptr;
  for (int id : index.subsets_of(query))
    if (!best || beats(entries[id], *best)) best = &entries[id];
  return best->config;
}

double csh(const SubsetIndex& index, const ClosureConfig& query) {
  double best = index.baseline();
  const auto& entries = index.entries();
  for (int id : index.subsets_of(query)) best = std::max(best, entries[id].ttt);
  return best;
}

double cash(const SubsetIndex& index, const ClosureConfig& query) {
  const ClosureConfig costliest = argmax_subset(index, query);
  const ClosureConfig remainder = query.minus(costliest);
  return csh(index, costliest) + csh(index, remainder) - index.baseline();
}

std::optional<double> csuph(const SubsetIndex& index, const ClosureConfig& query) {
  index.baseline();
  std::optional<double> best;
  const auto& entries = index.entries();
  for (int id : index.supersets_of(query))
    if (!best || entries[id].ttt < *best) best = entries[id].ttt;
  return best;
}

}  // namespace roadwork
