#include "advise/forest.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "advise/core.hpp"

namespace advise {

namespace {

using json = nlohmann::json;
using i128 = __int128;

/// Each feature column replaced by the rank of its value among the column's
/// distinct sorted values; splits are searched over ranks.
struct BinnedFeatures {
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::uint32_t>> codes;
};

BinnedFeatures bin_features(const FeatureMatrix& x) {
  BinnedFeatures b;
  b.values.resize(x.cols());
  b.codes.resize(x.cols());
  std::vector<double> column(x.rows());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t r = 0; r < x.rows(); ++r) column[r] = x.at(r, f);
    auto& vals = b.values[f];
    vals = column;
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    auto& codes = b.codes[f];
    codes.resize(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      codes[r] = static_cast<std::uint32_t>(std::lower_bound(vals.begin(), vals.end(), column[r]) - vals.begin());
    }
  }
  return b;
}

struct BinStat {
  std::uint32_t code;
  std::int64_t n;
  std::int64_t pos;
};

/// Split quality as the exact fraction num/den of
///   (pL^2 + qL^2)/nL + (pR^2 + qR^2)/nR,
/// which is n minus n times the weighted child Gini; larger is better.
struct Candidate {
  bool valid = false;
  i128 num = 0;
  i128 den = 1;
  int feature = -1;
  std::uint32_t code = 0;       // last rank sent left
  std::uint32_t next_code = 0;  // first rank sent right
};

bool better(const Candidate& a, const Candidate& b) {
  if (!b.valid) return true;
  const i128 lhs = a.num * b.den;
  const i128 rhs = b.num * a.den;
  if (lhs != rhs) return lhs > rhs;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.code < b.code;
}

class TreeBuilder {
 public:
  TreeBuilder(const BinnedFeatures& bins, std::span<const int> y, const ForestConfig& cfg,
              std::vector<int> weights, RngSeed seed)
      : bins_(bins), y_(y), cfg_(cfg), weights_(std::move(weights)), rng_(seed.derive("features")) {
    for (std::uint32_t r = 0; r < weights_.size(); ++r) {
      if (weights_[r] > 0) rows_.push_back(r);
    }
    std::size_t max_bins = 0;
    for (const auto& v : bins_.values) max_bins = std::max(max_bins, v.size());
    hist_n_.assign(max_bins, 0);
    hist_pos_.assign(max_bins, 0);
  }

  DecisionTree build() {
    struct Work {
      int node;
      std::size_t begin, end;
      int depth;
    };
    nodes_.emplace_back();
    std::vector<Work> stack{{0, 0, rows_.size(), 0}};
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      std::int64_t n = 0, pos = 0;
      for (std::size_t i = w.begin; i < w.end; ++i) {
        n += weights_[rows_[i]];
        pos += static_cast<std::int64_t>(weights_[rows_[i]]) * y_[rows_[i]];
      }
      auto& node = nodes_[static_cast<std::size_t>(w.node)];
      node.n_samples = n;
      node.n_positive = pos;
      node.value = static_cast<double>(pos) / static_cast<double>(n);

      const bool depth_reached = cfg_.max_depth >= 0 && w.depth >= cfg_.max_depth;
      if (n < cfg_.min_samples_split || depth_reached || pos == 0 || pos == n) continue;

      const Candidate best = find_split(w.begin, w.end, n, pos);
      if (!best.valid) continue;

      const auto& codes = bins_.codes[static_cast<std::size_t>(best.feature)];
      auto mid = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(w.begin),
                                rows_.begin() + static_cast<std::ptrdiff_t>(w.end),
                                [&](std::uint32_t r) { return codes[r] <= best.code; });
      const auto split = static_cast<std::size_t>(mid - rows_.begin());

      const auto& vals = bins_.values[static_cast<std::size_t>(best.feature)];
      const double lo = vals[best.code];
      const double hi = vals[best.next_code];
      double threshold = lo + (hi - lo) / 2.0;
      if (threshold >= hi) threshold = lo;  // adjacent doubles

      const int left = static_cast<int>(nodes_.size());
      nodes_.emplace_back();
      nodes_.emplace_back();
      auto& parent = nodes_[static_cast<std::size_t>(w.node)];
      parent.feature = best.feature;
      parent.threshold = threshold;
      parent.left = left;
      parent.right = left + 1;
      stack.push_back({left + 1, split, w.end, w.depth + 1});
      stack.push_back({left, w.begin, split, w.depth + 1});
    }
    return DecisionTree(std::move(nodes_));
  }

 private:
  Candidate find_split(std::size_t begin, std::size_t end, std::int64_t n, std::int64_t pos) {
    const std::size_t n_features = bins_.values.size();
    std::vector<int> order(n_features);
    std::iota(order.begin(), order.end(), 0);
    Candidate best;
    int examined = 0;
    // Features are drawn without replacement; constant ones do not count
    // toward max_features.
    for (std::size_t j = 0; j < n_features && examined < cfg_.max_features; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(rng_.below(n_features - j));
      std::swap(order[j], order[pick]);
      const int f = order[j];
      collect_stats(static_cast<std::size_t>(f), begin, end);
      if (stats_.size() < 2) continue;
      ++examined;
      std::int64_t n_left = 0, pos_left = 0;
      for (std::size_t s = 0; s + 1 < stats_.size(); ++s) {
        n_left += stats_[s].n;
        pos_left += stats_[s].pos;
        const std::int64_t n_right = n - n_left;
        if (n_left < cfg_.min_samples_leaf || n_right < cfg_.min_samples_leaf) continue;
        const std::int64_t pos_right = pos - pos_left;
        const std::int64_t neg_left = n_left - pos_left;
        const std::int64_t neg_right = n_right - pos_right;
        Candidate c;
        c.valid = true;
        const i128 sq_left = i128(pos_left) * pos_left + i128(neg_left) * neg_left;
        const i128 sq_right = i128(pos_right) * pos_right + i128(neg_right) * neg_right;
        c.num = sq_left * n_right + sq_right * n_left;
        c.den = i128(n_left) * n_right;
        c.feature = f;
        c.code = stats_[s].code;
        c.next_code = stats_[s + 1].code;
        if (better(c, best)) best = c;
      }
    }
    return best;
  }

  void collect_stats(std::size_t f, std::size_t begin, std::size_t end) {
    stats_.clear();
    const auto& codes = bins_.codes[f];
    const std::size_t m = end - begin;
    const std::size_t n_bins = bins_.values[f].size();
    if (n_bins <= 4 * m) {
      std::uint32_t lo = UINT32_MAX, hi = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t r = rows_[i];
        const std::uint32_t c = codes[r];
        hist_n_[c] += weights_[r];
        hist_pos_[c] += static_cast<std::int64_t>(weights_[r]) * y_[r];
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      for (std::uint32_t c = lo; c <= hi; ++c) {
        if (hist_n_[c] > 0) {
          stats_.push_back({c, hist_n_[c], hist_pos_[c]});
          hist_n_[c] = 0;
          hist_pos_[c] = 0;
        }
      }
      return;
    }
    sort_buf_.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const std::uint32_t r = rows_[begin + i];
      sort_buf_[i] = (static_cast<std::uint64_t>(codes[r]) << 32) | r;
    }
    std::sort(sort_buf_.begin(), sort_buf_.end());
    for (std::uint64_t packed : sort_buf_) {
      const auto c = static_cast<std::uint32_t>(packed >> 32);
      const auto r = static_cast<std::uint32_t>(packed & 0xffffffffu);
      if (stats_.empty() || stats_.back().code != c) stats_.push_back({c, 0, 0});
      stats_.back().n += weights_[r];
      stats_.back().pos += static_cast<std::int64_t>(weights_[r]) * y_[r];
    }
  }

  const BinnedFeatures& bins_;
  std::span<const int> y_;
  const ForestConfig& cfg_;
  std::vector<int> weights_;
  Rng rng_;
  std::vector<std::uint32_t> rows_;
  std::vector<TreeNode> nodes_;
  std::vector<std::int64_t> hist_n_, hist_pos_;
  std::vector<std::uint64_t> sort_buf_;
  std::vector<BinStat> stats_;
};

}  // namespace

void FeatureMatrix::push_row(std::span<const double> row) {
  if (rows_ == 0 && cols_ == 0) cols_ = row.size();
  if (row.size() != cols_) throw ValidationError("feature row length mismatch");
  data_.insert(data_.end(), row.begin(), row.end());
  ++rows_;
}

void ForestConfig::validate(std::size_t n_features) const {
  if (n_estimators < 1) throw ValidationError("n_estimators must be >= 1");
  if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be >= 1");
  if (min_samples_split < 2 * min_samples_leaf) {
    throw ValidationError("min_samples_split must be >= 2 * min_samples_leaf");
  }
  if (max_features < 1 || static_cast<std::size_t>(max_features) > n_features) {
    throw ValidationError("max_features must lie in [1, " + std::to_string(n_features) + "]");
  }
  if (n_threads < 0) throw ValidationError("n_threads must be >= 0");
}

json to_json(const ForestConfig& c) {
  return json{{"n_estimators", c.n_estimators}, {"min_samples_split", c.min_samples_split},
              {"min_samples_leaf", c.min_samples_leaf}, {"max_features", c.max_features},
              {"max_depth", c.max_depth}, {"bootstrap", c.bootstrap}, {"seed", c.seed}};
}

ForestConfig forest_config_from_json(const json& j) {
  ForestConfig c;
  c.n_estimators = j.at("n_estimators");
  c.min_samples_split = j.at("min_samples_split");
  c.min_samples_leaf = j.at("min_samples_leaf");
  c.max_features = j.at("max_features");
  c.max_depth = j.at("max_depth");
  c.bootstrap = j.at("bootstrap");
  c.seed = j.at("seed");
  return c;
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ValidationError("tree has no nodes");
  // Children must point forward, which rules out cycles; every non-root node
  // must have exactly one parent.
  std::vector<int> parents(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.is_leaf()) continue;
    for (int child : {n.left, n.right}) {
      if (child <= static_cast<int>(i) || child >= static_cast<int>(nodes_.size())) {
        throw ValidationError("malformed tree: bad child index");
      }
      ++parents[static_cast<std::size_t>(child)];
    }
  }
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (parents[i] != 1) throw ValidationError("malformed tree: unreachable or shared node");
  }
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i];
}

double gini(std::int64_t positive, std::int64_t total) {
  if (total <= 0) throw ValidationError("gini of empty node");
  const double p = static_cast<double>(positive) / static_cast<double>(total);
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

std::vector<int> bootstrap_counts(std::size_t n, RngSeed seed) {
  Rng rng{seed.derive("bootstrap")};
  std::vector<int> counts(n, 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[rng.below(n)];
  return counts;
}

RngSeed tree_seed(std::uint64_t seed, std::size_t index) { return RngSeed(seed).derive("tree", index); }

ForestModel::ForestModel(ForestConfig config, std::size_t n_features, std::vector<DecisionTree> trees)
    : config_(config), n_features_(n_features), trees_(std::move(trees)) {
  if (trees_.empty()) throw ValidationError("forest has no trees");
  for (const auto& t : trees_) {
    for (const auto& n : t.nodes()) {
      if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= n_features_) {
        throw ValidationError("malformed tree: feature index out of range");
      }
    }
  }
}

double ForestModel::predict_proba(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw ValidationError("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                          std::to_string(n_features_));
  }
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> ForestModel::predict_proba_batch(const FeatureMatrix& x) const {
  if (x.cols() != n_features_) {
    throw ValidationError("feature matrix has " + std::to_string(x.cols()) + " columns, model expects " +
                          std::to_string(n_features_));
  }
  std::vector<double> sum(x.rows(), 0.0);
  for (const auto& t : trees_) {
    for (std::size_t r = 0; r < x.rows(); ++r) sum[r] += t.predict(x.row(r));
  }
  for (auto& v : sum) v /= static_cast<double>(trees_.size());
  return sum;
}

bool ForestModel::classify(std::span<const double> x, double threshold) const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("threshold outside [0,1]");
  return predict_proba(x) >= threshold;
}

json ForestModel::to_json() const {
  json trees = json::array();
  for (const auto& t : trees_) {
    json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
         n_samples = json::array(), n_positive = json::array();
    for (const auto& n : t.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      n_samples.push_back(n.n_samples);
      n_positive.push_back(n.n_positive);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                     {"n_samples", n_samples}, {"n_positive", n_positive}});
  }
  return json{{"n_features", n_features_}, {"config", advise::to_json(config_)}, {"trees", trees}};
}

ForestModel ForestModel::from_json(const json& j) {
  std::vector<DecisionTree> trees;
  for (const auto& t : j.at("trees")) {
    const auto& feature = t.at("feature");
    const std::size_t n = feature.size();
    for (const char* key : {"threshold", "left", "right", "n_samples", "n_positive"}) {
      if (t.at(key).size() != n) throw ValidationError("malformed tree: column length mismatch");
    }
    std::vector<TreeNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& node = nodes[i];
      node.feature = feature[i].get<int>();
      node.threshold = t["threshold"][i].get<double>();
      node.left = t["left"][i].get<int>();
      node.right = t["right"][i].get<int>();
      node.n_samples = t["n_samples"][i].get<std::int64_t>();
      node.n_positive = t["n_positive"][i].get<std::int64_t>();
      if (node.n_samples <= 0 || node.n_positive < 0 || node.n_positive > node.n_samples) {
        throw ValidationError("malformed tree: bad sample counts");
      }
      node.value = static_cast<double>(node.n_positive) / static_cast<double>(node.n_samples);
    }
    trees.emplace_back(std::move(nodes));
  }
  return ForestModel(forest_config_from_json(j.at("config")), j.at("n_features").get<std::size_t>(),
                     std::move(trees));
}

ForestModel fit_forest(const FeatureMatrix& x, std::span<const int> y, const ForestConfig& config) {
  config.validate(x.cols());
  if (y.size() != x.rows()) throw ValidationError("label count does not match row count");
  if (x.rows() < static_cast<std::size_t>(config.min_samples_split)) {
    throw ValidationError("need at least min_samples_split rows");
  }
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw ValidationError("labels must be 0 or 1");
    (v ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw ValidationError("training labels are single-class");

  const BinnedFeatures bins = bin_features(x);
  const auto n_trees = static_cast<std::size_t>(config.n_estimators);
  std::vector<DecisionTree> trees(n_trees);

  auto fit_one = [&](std::size_t t) {
    const RngSeed seed = tree_seed(config.seed, t);
    std::vector<int> weights = config.bootstrap ? bootstrap_counts(x.rows(), seed) : std::vector<int>(x.rows(), 1);
    trees[t] = TreeBuilder(bins, y, config, std::move(weights), seed).build();
  };

  std::size_t n_threads = config.n_threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                                : static_cast<std::size_t>(config.n_threads);
  n_threads = std::min(n_threads, n_trees);
  if (n_threads <= 1) {
    for (std::size_t t = 0; t < n_trees; ++t) fit_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < n_threads; ++w) {
      workers.emplace_back([&] {
        for (std::size_t t; (t = next.fetch_add(1)) < n_trees;) fit_one(t);
      });
    }
  }
  return ForestModel(config, x.cols(), std::move(trees));
}

}  // namespace advise
