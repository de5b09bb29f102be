#include "roadwork/trees.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace roadwork {

double RegressionTree::predict(std::span<const double> row) const {
  int k = 0;
  while (nodes[k].feature >= 0) k = row[nodes[k].feature] <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
  return nodes[k].value;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].feature < 0) continue;
    d[nodes[k].left] = d[nodes[k].right] = d[k] + 1;
    best = std::max(best, d[k] + 1);
  }
  return best;
}

PresortedColumns presort(const Eigen::MatrixXd& x) {
  PresortedColumns order(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    auto& o = order[c];
    o.resize(x.rows());
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return x(a, c) < x(b, c); });
  }
  return order;
}

namespace {

struct NodeStats {
  double w = 0.0, s = 0.0, q = 0.0;  // total weight, weighted sum, weighted sum of squares
};

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct Scan {
  double lw = 0.0, ls = 0.0, last = 0.0;
  bool any = false;
};

}  // namespace

RegressionTree grow_tree(const Eigen::MatrixXd& x, const PresortedColumns& order,
                         std::span<const double> target, std::span<const double> weight,
                         const TreeOptions& opts, std::uint64_t seed, const LeafValueFn& leaf_value,
                         std::vector<int>* leaf_of_row) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  std::mt19937_64 rng(seed);

  RegressionTree tree;
  tree.nodes.emplace_back();
  std::vector<int> node_of(n, -1);
  NodeStats root;
  for (int i = 0; i < n; ++i) {
    if (weight[i] <= 0.0) continue;
    node_of[i] = 0;
    root.w += weight[i];
    root.s += weight[i] * target[i];
    root.q += weight[i] * target[i] * target[i];
  }
  std::vector<NodeStats> stats{root};
  std::vector<int> frontier{0};

  const int tried = (opts.max_features <= 0 || opts.max_features >= p) ? p : opts.max_features;
  std::vector<int> features(p);
  std::iota(features.begin(), features.end(), 0);

  for (int depth = 0; depth < opts.max_depth && !frontier.empty(); ++depth) {
    const int m = static_cast<int>(frontier.size());
    std::vector<int> slot_of_node(tree.nodes.size(), -1);
    for (int j = 0; j < m; ++j) slot_of_node[frontier[j]] = j;

    // allowed[j * p + f]: whether frontier node j may split on feature f
    std::vector<char> allowed(static_cast<std::size_t>(m) * p, tried == p ? 1 : 0);
    if (tried < p) {
      for (int j = 0; j < m; ++j) {
        for (int i = 0; i < tried; ++i) {
          const int k = std::uniform_int_distribution<int>(i, p - 1)(rng);
          std::swap(features[i], features[k]);
          allowed[static_cast<std::size_t>(j) * p + features[i]] = 1;
        }
      }
    }

    std::vector<Candidate> best(m);
    std::vector<Scan> scan(m);
    for (int f = 0; f < p; ++f) {
      std::fill(scan.begin(), scan.end(), Scan{});
      for (int row : order[f]) {
        const int node = node_of[row];
        if (node < 0) continue;
        const int j = slot_of_node[node];
        if (j < 0 || !allowed[static_cast<std::size_t>(j) * p + f]) continue;
        const double v = x(row, f);
        Scan& sc = scan[j];
        const NodeStats& ns = stats[node];
        if (sc.any && v > sc.last && sc.lw >= opts.min_leaf && ns.w - sc.lw >= opts.min_leaf) {
          const double rw = ns.w - sc.lw, rs = ns.s - sc.ls;
          const double gain = sc.ls * sc.ls / sc.lw + rs * rs / rw - ns.s * ns.s / ns.w;
          if (gain > best[j].gain) best[j] = {gain, f, sc.last + 0.5 * (v - sc.last)};
        }
        sc.lw += weight[row];
        sc.ls += weight[row] * target[row];
        sc.last = v;
        sc.any = true;
      }
    }

    std::vector<int> next;
    std::vector<int> split_feature(tree.nodes.size(), -1);
    for (int j = 0; j < m; ++j) {
      const int node = frontier[j];
      const NodeStats& ns = stats[node];
      const double sse = ns.q - ns.s * ns.s / ns.w;
      if (best[j].feature < 0 || !(best[j].gain > 1e-9 * std::max(sse, 0.0)) || sse <= 0.0) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      stats.emplace_back();
      stats.emplace_back();
      tree.nodes[node].feature = best[j].feature;
      tree.nodes[node].threshold = best[j].threshold;
      tree.nodes[node].left = left;
      tree.nodes[node].right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    for (int i = 0; i < n; ++i) {
      const int node = node_of[i];
      if (node < 0 || tree.nodes[node].feature < 0) continue;
      const TreeNode& t = tree.nodes[node];
      const int child = x(i, t.feature) <= t.threshold ? t.left : t.right;
      node_of[i] = child;
      stats[child].w += weight[i];
      stats[child].s += weight[i] * target[i];
      stats[child].q += weight[i] * target[i] * target[i];
    }
    frontier = std::move(next);
  }

  std::vector<std::vector<int>> members(tree.nodes.size());
  for (int i = 0; i < n; ++i)
    if (node_of[i] >= 0) members[node_of[i]].push_back(i);
  for (std::size_t k = 0; k < tree.nodes.size(); ++k)
    if (tree.nodes[k].feature < 0) tree.nodes[k].value = leaf_value(members[k]);
  if (leaf_of_row) *leaf_of_row = std::move(node_of);
  return tree;
}

}  // namespace roadwork
