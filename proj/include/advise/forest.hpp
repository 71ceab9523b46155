#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "advise/rng.hpp"

namespace advise {

/// Dense row-major feature matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  void push_row(std::span<const double> row);

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct ForestConfig {
  int n_estimators = 400;
  int min_samples_split = 100;
  int min_samples_leaf = 50;
  int max_features = 4;
  int max_depth = -1;  // < 0: unbounded
  bool bootstrap = true;  // off only for oracle tests
  std::uint64_t seed = 0;
  int n_threads = 1;  // 0: hardware concurrency

  void validate(std::size_t n_features) const;
};

nlohmann::json to_json(const ForestConfig& c);
ForestConfig forest_config_from_json(const nlohmann::json& j);

/// Array-encoded tree node. Leaves have feature == -1. Sample counts include
/// bootstrap multiplicity.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;  // go left iff x[feature] <= threshold
  int left = -1;
  int right = -1;
  std::int64_t n_samples = 0;
  std::int64_t n_positive = 0;
  double value = 0.0;  // positive fraction of the node's samples

  [[nodiscard]] bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes);

  [[nodiscard]] const std::vector<TreeNode>& nodes() const { return nodes_; }
  [[nodiscard]] const TreeNode& leaf_for(std::span<const double> x) const;
  [[nodiscard]] double predict(std::span<const double> x) const { return leaf_for(x).value; }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

/// Gini impurity 1 - p^2 - (1-p)^2 of a node with `positive` of `total` samples.
double gini(std::int64_t positive, std::int64_t total);

/// Per-row multiplicities of one bootstrap sample of size n.
std::vector<int> bootstrap_counts(std::size_t n, RngSeed tree_seed);

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(ForestConfig config, std::size_t n_features, std::vector<DecisionTree> trees);

  /// Mean of leaf values, summed in tree-index order.
  [[nodiscard]] double predict_proba(std::span<const double> x) const;
  /// predict_proba for every row; loops tree-major for cache locality but
  /// accumulates in the same order, so results match row-by-row calls exactly.
  [[nodiscard]] std::vector<double> predict_proba_batch(const FeatureMatrix& x) const;
  /// predict_proba(x) >= threshold.
  [[nodiscard]] bool classify(std::span<const double> x, double threshold) const;

  [[nodiscard]] const ForestConfig& config() const { return config_; }
  [[nodiscard]] std::size_t n_features() const { return n_features_; }
  [[nodiscard]] const std::vector<DecisionTree>& trees() const { return trees_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);

  friend bool operator==(const ForestModel& a, const ForestModel& b) {
    return a.n_features_ == b.n_features_ && a.trees_ == b.trees_;
  }

 private:
  ForestConfig config_;
  std::size_t n_features_ = 0;
  std::vector<DecisionTree> trees_;
};

/// Seed stream used for tree `index` of a forest seeded with `seed`.
RngSeed tree_seed(std::uint64_t seed, std::size_t index);

ForestModel fit_forest(const FeatureMatrix& x, std::span<const int> y, const ForestConfig& config);

}  // namespace advise
