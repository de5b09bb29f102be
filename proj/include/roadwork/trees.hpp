#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace roadwork {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool operator==(const TreeNode&) const = default;
};

/// Binary regression tree; rows with x[feature] <= threshold go left.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const;
  int depth() const;
  bool operator==(const RegressionTree&) const = default;
};

// Per-feature row orderings by ascending value, shared by every tree of one fit.
using PresortedColumns = std::vector<std::vector<int>>;
PresortedColumns presort(const Eigen::MatrixXd& x);

struct TreeOptions {
  int max_depth = 4;
  double min_leaf = 5.0;  // minimum total row weight per child
  int max_features = 0;   // features tried per node; 0 means all
};

// Value of a leaf given the rows (and their weights) that reach it.
using LeafValueFn = std::function<double(std::span<const int> rows)>;

/// Grows a tree level by level: every active node scans each presorted column once
/// and takes the split with the largest weighted squared-error reduction on
/// `target`. Rows with zero weight are ignored. When `leaf_of_row` is given it
/// receives the leaf node id of every weighted row.
RegressionTree grow_tree(const Eigen::MatrixXd& x, const PresortedColumns& order,
                         std::span<const double> target, std::span<const double> weight,
                         const TreeOptions& opts, std::uint64_t seed, const LeafValueFn& leaf_value,
                         std::vector<int>* leaf_of_row = nullptr);

}  // namespace roadwork
