#include "roadwork/features.hpp"

#include <fmt/format.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>

#include "roadwork/linear.hpp"

namespace roadwork {

FeatureMatrix::FeatureMatrix(std::vector<std::string> names, std::size_t row_count)
    : columns(std::move(names)), rows(row_count), values(columns.size() * row_count, 0.0) {}

std::vector<double> FeatureMatrix::column(std::size_t c) const {
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
  return out;
}

std::optional<std::size_t> FeatureMatrix::find(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns.begin());
}

FeatureMatrix FeatureMatrix::select_rows(std::size_t begin, std::size_t end) const {
  FeatureMatrix out(columns, end - begin);
  std::copy(values.begin() + static_cast<std::ptrdiff_t>(begin * cols()),
            values.begin() + static_cast<std::ptrdiff_t>(end * cols()), out.values.begin());
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::string> names) const {
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    auto c = find(n);
    if (!c) throw ValidationError("unknown feature column '" + n + "'");
    idx.push_back(*c);
  }
  FeatureMatrix out(std::vector<std::string>(names.begin(), names.end()), rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < idx.size(); ++j) out.at(r, j) = at(r, idx[j]);
  return out;
}

void FeatureMatrix::validate() const {
  std::set<std::string> seen;
  for (const auto& c : columns)
    if (!seen.insert(c).second) throw ValidationError("duplicate feature column '" + c + "'");
  if (values.size() != rows * cols()) throw ValidationError("feature matrix shape mismatch");
  for (double v : values)
    if (!std::isfinite(v)) throw ValidationError("non-finite feature value");
}

void FeatureMatrix::write_csv(std::ostream& out) const {
  for (std::size_t c = 0; c < cols(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols(); ++c) out << (c ? "," : "") << fmt::format("{}", at(r, c));
    out << '\n';
  }
}

Representation representation_from_string(const std::string& name) {
  if (name == "one_hot") return Representation::one_hot;
  if (name == "pairwise") return Representation::pairwise;
  if (name == "engineered") return Representation::engineered;
  if (name == "combined") return Representation::combined;
  throw ValidationError("unknown feature representation '" + name + "'");
}

std::string to_string(Representation r) {
  switch (r) {
    case Representation::one_hot: return "one_hot";
    case Representation::pairwise: return "pairwise";
    case Representation::engineered: return "engineered";
    case Representation::combined: return "combined";
  }
  return "?";
}

namespace {

constexpr double kTieEps = 1e-12;

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= kTieEps * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// Brandes single-source pass: adds the source's dependency on every link to `acc`.
void accumulate_source(const Network& network, NodeIndex source, std::vector<double>& acc) {
  const auto n = network.node_count();
  const auto links = network.links();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<double> sigma(n, 0.0), delta(n, 0.0);
  std::vector<std::vector<int>> preds(n);
  std::vector<char> done(n, 0);
  std::vector<NodeIndex> order;
  using Item = std::pair<double, NodeIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  sigma[source] = 1.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = 1;
    order.push_back(u);
    for (int slot : network.out_links(u)) {
      const Link& l = links[slot];
      const NodeIndex v = l.head;
      if (done[v]) continue;
      const double nd = d + l.fft;
      if (std::isinf(dist[v]) || (nd < dist[v] && !nearly_equal(nd, dist[v]))) {
        dist[v] = nd;
        sigma[v] = sigma[u];
        preds[v].assign(1, slot);
        heap.emplace(nd, v);
      } else if (nearly_equal(nd, dist[v])) {
        sigma[v] += sigma[u];
        preds[v].push_back(slot);
      }
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeIndex w = *it;
    for (int slot : preds[w]) {
      const Link& l = links[slot];
      const double c = sigma[l.tail] / sigma[w] * (1.0 + delta[w]);
      acc[l.id] += c;
      delta[l.tail] += c;
    }
  }
}

std::vector<double> sssp_fft(const Network& network, NodeIndex source) {
  return shortest_path_tree(network, free_flow_costs(network), source).dist;
}

}  // namespace

std::vector<double> edge_betweenness_serial(const Network& network) {
  std::vector<double> bc(network.id_space(), 0.0);
  for (NodeIndex s = 0; s < static_cast<NodeIndex>(network.node_count()); ++s) {
    std::vector<double> part(network.id_space(), 0.0);
    accumulate_source(network, s, part);
    for (std::size_t i = 0; i < bc.size(); ++i) bc[i] += part[i];
  }
  return bc;
}

std::vector<double> edge_betweenness_parallel(const Network& network, int threads) {
  const auto n = static_cast<int>(network.node_count());
  std::vector<std::vector<double>> parts(n, std::vector<double>(network.id_space(), 0.0));
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (int s = 0; s < n; ++s) accumulate_source(network, s, parts[s]);
  std::vector<double> bc(network.id_space(), 0.0);
  for (const auto& part : parts)
    for (std::size_t i = 0; i < bc.size(); ++i) bc[i] += part[i];
  return bc;
}

std::vector<double> node_closeness(const Network& network) {
  const auto n = network.node_count();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  for (NodeIndex v = 0; v < static_cast<NodeIndex>(n); ++v) {
    const auto dist = sssp_fft(network, v);
    double total = 0.0;
    double reached = 0.0;
    for (NodeIndex u = 0; u < static_cast<NodeIndex>(n); ++u) {
      if (u == v || std::isinf(dist[u])) continue;
      total += dist[u];
      reached += 1.0;
    }
    if (total > 0.0) out[v] = (reached / total) * (reached / static_cast<double>(n - 1));
  }
  return out;
}

BaselineStats compute_baseline_stats(const Network& network, const Equilibrium& baseline, int threads) {
  BaselineStats s;
  s.project_count = network.id_space();
  s.baseline_ttt = baseline.ttt;
  const auto m = network.id_space();
  s.flow.assign(m, 0.0);
  s.cost.assign(m, 0.0);
  s.closeness.assign(m, 0.0);
  s.fft.assign(m, 0.0);
  s.capacity.assign(m, 0.0);
  s.betweenness = threads > 1 ? edge_betweenness_parallel(network, threads) : edge_betweenness_serial(network);
  const auto node_c = node_closeness(network);
  for (const auto& l : network.links()) {
    s.flow[l.id] = baseline.flows[l.id];
    s.cost[l.id] = bpr_cost(l, baseline.flows[l.id]);
    s.closeness[l.id] = 0.5 * (node_c[l.tail] + node_c[l.head]);
    s.fft[l.id] = l.fft;
    s.capacity[l.id] = l.capacity;
  }
  return s;
}

std::vector<double> one_hot(const ClosureConfig& config, std::size_t project_count) {
  std::vector<double> v(project_count, 0.0);
  for (LinkId id : config.ids()) {
    if (id < 0 || static_cast<std::size_t>(id) >= project_count)
      throw ValidationError("closure id " + std::to_string(id) + " out of range");
    v[id] = 1.0;
  }
  return v;
}

namespace {

// Position of pair (i, j), i < j, in the canonical row-major upper-triangle order.
std::size_t pair_slot(std::size_t i, std::size_t j, std::size_t n) {
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

}  // namespace

std::vector<double> pairwise_encode(const ClosureConfig& config, std::size_t project_count) {
  one_hot(config, project_count);  // range check
  std::vector<double> v(project_count * (project_count - (project_count ? 1 : 0)) / 2, 0.0);
  const auto ids = config.ids();
  for (std::size_t a = 0; a < ids.size(); ++a)
    for (std::size_t b = a + 1; b < ids.size(); ++b)
      v[pair_slot(static_cast<std::size_t>(ids[a]), static_cast<std::size_t>(ids[b]), project_count)] = 1.0;
  return v;
}

namespace {

struct Quantity {
  const char* name;
  double (*value)(const BaselineStats&, LinkId);
};

const std::vector<Quantity>& quantities() {
  static const std::vector<Quantity> q = {
      {"disrupted_flow", [](const BaselineStats& s, LinkId l) { return s.flow[l]; }},
      {"baseline_cost", [](const BaselineStats& s, LinkId l) { return s.cost[l]; }},
      {"naive_impact", [](const BaselineStats& s, LinkId l) { return s.flow[l] * s.cost[l]; }},
      {"betweenness", [](const BaselineStats& s, LinkId l) { return s.betweenness[l]; }},
      {"closeness", [](const BaselineStats& s, LinkId l) { return s.closeness[l]; }},
      {"fft", [](const BaselineStats& s, LinkId l) { return s.fft[l]; }},
      {"capacity", [](const BaselineStats& s, LinkId l) { return s.capacity[l]; }},
  };
  return q;
}

}  // namespace

const std::vector<std::string>& engineered_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"set_size"};
    for (const auto& q : quantities())
      for (const char* stat : {"sum", "max", "mean"}) n.push_back(std::string(q.name) + "_" + stat);
    return n;
  }();
  return names;
}

std::vector<double> engineered_features(const ClosureConfig& config, const BaselineStats& stats) {
  std::vector<double> out;
  out.reserve(engineered_feature_names().size());
  const double k = static_cast<double>(config.size());
  out.push_back(k);
  for (const auto& q : quantities()) {
    double sum = 0.0, mx = 0.0;
    bool first = true;
    for (LinkId id : config.ids()) {
      if (id < 0 || static_cast<std::size_t>(id) >= stats.project_count)
        throw ValidationError("closure id " + std::to_string(id) + " out of range");
      const double v = q.value(stats, id);
      sum += v;
      mx = first ? v : std::max(mx, v);
      first = false;
    }
    out.push_back(sum);
    out.push_back(mx);
    out.push_back(k > 0 ? sum / k : 0.0);
  }
  return out;
}

std::vector<Correlation> pearson_screen(const FeatureMatrix& matrix, std::span<const double> targets,
                                        TargetTransform transform) {
  if (matrix.rows < 3) throw ValidationError("pearson_screen needs at least 3 rows");
  if (targets.size() != matrix.rows) throw ValidationError("target length does not match rows");
  std::vector<double> y(targets.begin(), targets.end());
  if (transform == TargetTransform::log) {
    for (double& v : y) {
      if (!(v > 0.0)) throw ValidationError("log transform needs positive targets");
      v = std::log(v);
    }
  }
  const double n = static_cast<double>(y.size());
  const double ym = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double syy = 0.0;
  for (double v : y) syy += (v - ym) * (v - ym);
  if (!(syy > 0.0)) throw ValidationError("target variance is zero");

  std::vector<Correlation> out;
  for (std::size_t c = 0; c < matrix.cols(); ++c) {
    const auto x = matrix.column(c);
    const double xm = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxx += (x[i] - xm) * (x[i] - xm);
      sxy += (x[i] - xm) * (y[i] - ym);
    }
    Correlation cor{matrix.columns[c], 0.0, false};
    if (sxx <= 1e-300 * n)
      cor.degenerate = true;
    else
      cor.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    out.push_back(cor);
  }
  return out;
}

double cross_validated_r2(const FeatureMatrix& matrix, std::span<const double> log_targets,
                          std::span<const std::size_t> columns, std::size_t folds, std::uint64_t seed) {
  const std::size_t n = matrix.rows;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[perm[i]] = i % folds;

  std::vector<double> oof(n, 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);
    if (train.empty() || test.empty()) continue;
    Eigen::MatrixXd xt(train.size(), columns.size());
    Eigen::VectorXd yt(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) {
      for (std::size_t c = 0; c < columns.size(); ++c) xt(r, c) = matrix.at(train[r], columns[c]);
      yt(r) = log_targets[train[r]];
    }
    const auto model = fit_ols(xt, yt);
    Eigen::MatrixXd xv(test.size(), columns.size());
    for (std::size_t r = 0; r < test.size(); ++r)
      for (std::size_t c = 0; c < columns.size(); ++c) xv(r, c) = matrix.at(test[r], columns[c]);
    const Eigen::VectorXd pred = model.predict(xv);
    for (std::size_t r = 0; r < test.size(); ++r) oof[test[r]] = pred(r);
  }
  const double ym = std::accumulate(log_targets.begin(), log_targets.end(), 0.0) / static_cast<double>(n);
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sse += (log_targets[i] - oof[i]) * (log_targets[i] - oof[i]);
    sst += (log_targets[i] - ym) * (log_targets[i] - ym);
  }
  if (!(sst > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return 1.0 - sse / sst;
}

std::vector<std::string> sequential_select(const FeatureMatrix& matrix, std::span<const double> targets,
                                           const SelectionOptions& opts) {
  if (opts.folds < 2) throw ValidationError("folds must be >= 2");
  if (opts.k > matrix.cols()) throw ValidationError("k exceeds the number of columns");
  if (targets.size() != matrix.rows) throw ValidationError("target length does not match rows");
  if (matrix.rows < opts.folds) throw ValidationError("fewer rows than folds");
  std::vector<double> y(targets.begin(), targets.end());
  for (double& v : y) {
    if (!(v > 0.0)) throw ValidationError("selection needs positive targets");
    v = std::log(v);
  }

  // Candidate visiting order: by feature name, so ties go to the first name.
  std::vector<std::size_t> by_name(matrix.cols());
  std::iota(by_name.begin(), by_name.end(), 0);
  std::sort(by_name.begin(), by_name.end(),
            [&](std::size_t a, std::size_t b) { return matrix.columns[a] < matrix.columns[b]; });

  auto score = [&](const std::vector<std::size_t>& cols) {
    try {
      return cross_validated_r2(matrix, y, cols, opts.folds, opts.seed);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  std::vector<std::size_t> chosen;
  if (opts.direction == SelectionDirection::forward) {
    while (chosen.size() < opts.k) {
      double best = -std::numeric_limits<double>::infinity();
      std::optional<std::size_t> pick;
      for (std::size_t c : by_name) {
        if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
        auto trial = chosen;
        trial.push_back(c);
        const double s = score(trial);
        if (std::isfinite(s) && s > best) {
          best = s;
          pick = c;
        }
      }
      if (!pick) throw std::runtime_error("sequential_select: every candidate fit is degenerate");
      chosen.push_back(*pick);
    }
  } else {
    chosen.resize(matrix.cols());
    std::iota(chosen.begin(), chosen.end(), 0);
    while (chosen.size() > opts.k) {
      double best = -std::numeric_limits<double>::infinity();
      std::optional<std::size_t> drop;
      for (std::size_t c : by_name) {
        if (std::find(chosen.begin(), chosen.end(), c) == chosen.end()) continue;
        auto trial = chosen;
        std::erase(trial, c);
        const double s = trial.empty() ? 0.0 : score(trial);
        if (std::isfinite(s) && s > best) {
          best = s;
          drop = c;
        }
      }
      if (!drop) throw std::runtime_error("sequential_select: every candidate fit is degenerate");
      std::erase(chosen, *drop);
    }
  }
  std::vector<std::string> names;
  for (std::size_t c : chosen) names.push_back(matrix.columns[c]);
  return names;
}

std::vector<std::string> feature_columns(const FeatureSpec& spec, std::size_t project_count) {
  std::vector<std::string> cols;
  const bool with_onehot = spec.representation != Representation::engineered;
  const bool with_engineered =
      spec.representation == Representation::engineered || spec.representation == Representation::combined;
  if (with_onehot)
    for (std::size_t i = 0; i < project_count; ++i) cols.push_back(fmt::format("link_{}", i));
  if (spec.representation == Representation::pairwise)
    for (std::size_t i = 0; i < project_count; ++i)
      for (std::size_t j = i + 1; j < project_count; ++j) cols.push_back(fmt::format("pair_{}_{}", i, j));
  if (with_engineered) {
    const auto& registry = engineered_feature_names();
    if (spec.selected.empty()) {
      cols.insert(cols.end(), registry.begin(), registry.end());
    } else {
      for (const auto& name : spec.selected) {
        if (std::find(registry.begin(), registry.end(), name) == registry.end())
          throw ValidationError("unknown engineered feature '" + name + "'");
        cols.push_back(name);
      }
    }
  }
  if (spec.include_csh) cols.push_back("csh");
  return cols;
}

FeatureMatrix build_feature_matrix(std::span<const LabeledScenario> rows, const FeatureSpec& spec,
                                   const BaselineStats& stats, const SubsetIndex* prior, bool grow_index) {
  if (spec.include_csh && !prior) throw ValidationError("CSH features need a subset index with a baseline");
  const std::size_t p = stats.project_count;
  FeatureMatrix m(feature_columns(spec, p), rows.size());

  const auto& registry = engineered_feature_names();
  std::vector<std::size_t> engineered_pick;
  const bool with_engineered =
      spec.representation == Representation::engineered || spec.representation == Representation::combined;
  if (with_engineered) {
    if (spec.selected.empty()) {
      engineered_pick.resize(registry.size());
      std::iota(engineered_pick.begin(), engineered_pick.end(), 0);
    } else {
      for (const auto& name : spec.selected)
        engineered_pick.push_back(
            static_cast<std::size_t>(std::find(registry.begin(), registry.end(), name) - registry.begin()));
    }
  }

  std::optional<SubsetIndex> index;
  if (spec.include_csh) index = *prior;

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& cfg = rows[r].config;
    std::size_t c = 0;
    if (spec.representation != Representation::engineered) {
      for (double v : one_hot(cfg, p)) m.at(r, c++) = v;
    }
    if (spec.representation == Representation::pairwise) {
      for (double v : pairwise_encode(cfg, p)) m.at(r, c++) = v;
    }
    if (with_engineered) {
      const auto e = engineered_features(cfg, stats);
      for (std::size_t k : engineered_pick) m.at(r, c++) = e[k];
    }
    if (spec.include_csh) {
      m.at(r, c++) = csh(*index, cfg);
      if (grow_index) index->insert(rows[r]);
    }
  }
  return m;
}

}  // namespace roadwork

namespace roadwork {

FeatureMatrix build_feature_matrix(const Dataset& dataset, const FeatureSpec& spec, const BaselineStats& stats,
                                   const SubsetIndex* prior) {
  const SubsetIndex baseline_only(dataset.baseline_ttt);
  return build_feature_matrix(dataset.scenarios, spec, stats, prior ? prior : &baseline_only, true);
}

}  // namespace roadwork
