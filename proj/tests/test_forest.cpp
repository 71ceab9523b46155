#include <doctest.h>

#include <cmath>
#include <functional>

#include "advise/core.hpp"
#include "advise/forest.hpp"
#include "cart_oracle.hpp"

using namespace advise;

namespace {

ForestConfig single_tree(int min_split = 2, int min_leaf = 1, int max_depth = -1) {
  ForestConfig c;
  c.n_estimators = 1;
  c.min_samples_split = min_split;
  c.min_samples_leaf = min_leaf;
  c.max_features = 5;
  c.max_depth = max_depth;
  c.bootstrap = false;
  c.seed = 17;
  return c;
}

void check_same_tree(const std::vector<TreeNode>& got, const std::vector<TreeNode>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CAPTURE(i);
    CHECK(got[i].feature == want[i].feature);
    CHECK(got[i].threshold == want[i].threshold);
    CHECK(got[i].left == want[i].left);
    CHECK(got[i].right == want[i].right);
    CHECK(got[i].n_samples == want[i].n_samples);
    CHECK(got[i].n_positive == want[i].n_positive);
    CHECK(got[i].value == want[i].value);
  }
}

/// Training-row count per leaf, including bootstrap multiplicity.
void check_leaf_sizes(const ForestModel& m, const FeatureMatrix& x) {
  for (std::size_t t = 0; t < m.trees().size(); ++t) {
    const auto& tree = m.trees()[t];
    const auto counts = m.config().bootstrap ? bootstrap_counts(x.rows(), tree_seed(m.config().seed, t))
                                             : std::vector<int>(x.rows(), 1);
    std::vector<std::int64_t> routed(tree.nodes().size(), 0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      routed[static_cast<std::size_t>(&tree.leaf_for(x.row(r)) - tree.nodes().data())] += counts[r];
    }
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
      const auto& n = tree.nodes()[i];
      if (n.is_leaf()) {
        CHECK(n.n_samples >= m.config().min_samples_leaf);
        CHECK(routed[i] == n.n_samples);
      } else {
        CHECK(n.n_samples >= m.config().min_samples_split);
      }
    }
  }
}

FeatureMatrix learnable_set(std::uint64_t seed, std::size_t n, std::vector<int>& y) {
  Rng rng{RngSeed(seed)};
  FeatureMatrix x;
  y.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const double row[5] = {rng.uniform(), rng.uniform(), static_cast<double>(rng.below(4)), rng.uniform(),
                           rng.normal(0.0, 1.0)};
    x.push_row(row);
    const double z = 2.5 * (row[0] - 0.5) + 0.8 * row[2] - 1.2 + 0.5 * row[4];
    y.push_back(rng.bernoulli(1.0 / (1.0 + std::exp(-z))) ? 1 : 0);
  }
  return x;
}

}  // namespace

TEST_SUITE("forest") {

TEST_CASE("gini hand values") {
  CHECK(gini(2, 4) == 0.5);
  CHECK(gini(4, 4) == 0.0);
  CHECK(gini(0, 4) == 0.0);
  CHECK_THROWS_AS(gini(0, 0), ValidationError);
}

TEST_CASE("single tree matches brute-force CART") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    for (std::size_t n : {20u, 75u, 200u}) {
      CAPTURE(seed);
      CAPTURE(n);
      FeatureMatrix x;
      std::vector<int> y;
      testutil::oracle_toy_set(seed, n, x, y);
      if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) continue;
      const auto model = fit_forest(x, y, single_tree());
      testutil::CartOracle oracle{x, y, 2, 1, -1, {}};
      check_same_tree(model.trees()[0].nodes(), oracle.fit());
    }
  }
}

TEST_CASE("CART equivalence with leaf, split and depth limits") {
  for (std::uint64_t seed = 20; seed < 26; ++seed) {
    FeatureMatrix x;
    std::vector<int> y;
    testutil::oracle_toy_set(seed, 200, x, y);
    const auto model = fit_forest(x, y, single_tree(12, 5, 4));
    testutil::CartOracle oracle{x, y, 12, 5, 4, {}};
    check_same_tree(model.trees()[0].nodes(), oracle.fit());
  }
}

TEST_CASE("depth-2 tree on 12 rows") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    FeatureMatrix x;
    std::vector<int> y;
    testutil::oracle_toy_set(seed, 12, x, y);
    if (std::count(y.begin(), y.end(), 1) % 12 == 0) continue;
    const auto model = fit_forest(x, y, single_tree(2, 1, 2));
    testutil::CartOracle oracle{x, y, 2, 1, 2, {}};
    check_same_tree(model.trees()[0].nodes(), oracle.fit());
    for (const auto& node : model.trees()[0].nodes()) {
      if (!node.is_leaf()) CHECK(node.left < static_cast<int>(model.trees()[0].nodes().size()));
    }
  }
}

TEST_CASE("ties prefer the lowest feature then the lowest threshold") {
  // Columns 0 and 1 are identical, so every split ties across them.
  FeatureMatrix x;
  std::vector<int> y;
  for (int i = 0; i < 8; ++i) {
    const double row[2] = {double(i % 4), double(i % 4)};
    x.push_row(row);
    y.push_back(i % 4 == 0 || i % 4 == 3 ? 1 : 0);
  }
  ForestConfig cfg = single_tree(2, 1, 1);
  cfg.max_features = 2;
  const auto model = fit_forest(x, y, cfg);
  const auto& root = model.trees()[0].nodes()[0];
  CHECK(root.feature == 0);
  // Splits after 0 and after 2 tie on impurity; the lower threshold wins.
  CHECK(root.threshold == 0.5);
}

TEST_CASE("predict and classify") {
  const DecisionTree t1({TreeNode{0, 0.5, 1, 2, 10, 5, 0.5}, TreeNode{-1, 0, -1, -1, 10, 3, 0.3},
                         TreeNode{-1, 0, -1, -1, 5, 4, 0.8}});
  const DecisionTree t2({TreeNode{-1, 0, -1, -1, 5, 1, 0.2}});
  const DecisionTree t3({TreeNode{-1, 0, -1, -1, 5, 3, 0.6}});
  ForestConfig cfg;
  cfg.max_features = 1;
  const double x[1] = {0.1};
  CHECK(ForestModel(cfg, 1, {t1}).predict_proba(x) == 0.3);
  const ForestModel two(cfg, 1, {t2, t3});
  CHECK(two.predict_proba(x) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(two.classify(x, 0.4));
  CHECK_FALSE(two.classify(x, 0.41));
  CHECK_THROWS_AS((void)two.classify(x, 1.5), ValidationError);
  const double wrong[2] = {0, 0};
  CHECK_THROWS_AS((void)two.predict_proba(wrong), ValidationError);
}

TEST_CASE("fit errors") {
  FeatureMatrix x;
  std::vector<int> y;
  testutil::oracle_toy_set(1, 50, x, y);
  ForestConfig cfg = single_tree();
  cfg.max_features = 6;
  CHECK_THROWS_AS(fit_forest(x, y, cfg), ValidationError);
  cfg = single_tree(3, 2);
  CHECK_THROWS_AS(fit_forest(x, y, cfg), ValidationError);
  std::vector<int> ones(50, 1);
  CHECK_THROWS_WITH_AS(fit_forest(x, ones, single_tree()), doctest::Contains("single-class"), ValidationError);
  std::vector<int> short_y(y.begin(), y.begin() + 10);
  CHECK_THROWS_AS(fit_forest(x, short_y, single_tree()), ValidationError);
  auto bad = y;
  bad[0] = 2;
  CHECK_THROWS_AS(fit_forest(x, bad, single_tree()), ValidationError);
}

TEST_CASE("malformed trees are rejected") {
  CHECK_THROWS_AS(DecisionTree(std::vector<TreeNode>{}), ValidationError);
  CHECK_THROWS_AS(DecisionTree({TreeNode{0, 0.5, 0, 1, 2, 1, 0.5}, TreeNode{}}), ValidationError);
  CHECK_THROWS_AS(DecisionTree({TreeNode{0, 0.5, 1, 1, 2, 1, 0.5}, TreeNode{}}), ValidationError);
  ForestConfig cfg;
  CHECK_THROWS_AS(ForestModel(cfg, 1, {DecisionTree({TreeNode{3, 0.5, 1, 2, 2, 1, 0.5}, TreeNode{}, TreeNode{}})}),
                  ValidationError);
}

TEST_CASE("bootstrap forests are deterministic and respect leaf sizes") {
  std::vector<int> y;
  const auto x = learnable_set(5, 1500, y);
  ForestConfig cfg;
  cfg.n_estimators = 30;
  cfg.seed = 8;
  const auto a = fit_forest(x, y, cfg);
  const auto b = fit_forest(x, y, cfg);
  CHECK(a == b);
  check_leaf_sizes(a, x);
  cfg.seed = 9;
  CHECK_FALSE(fit_forest(x, y, cfg) == a);

  cfg.seed = 8;
  cfg.n_threads = 3;
  CHECK(fit_forest(x, y, cfg) == a);

  const auto batch = a.predict_proba_batch(x);
  for (std::size_t r = 0; r < x.rows(); ++r) CHECK(batch[r] == a.predict_proba(x.row(r)));
}

TEST_CASE("bootstrap counts sum to n") {
  const auto counts = bootstrap_counts(1000, tree_seed(3, 4));
  CHECK(std::accumulate(counts.begin(), counts.end(), 0) == 1000);
  CHECK(counts == bootstrap_counts(1000, tree_seed(3, 4)));
  CHECK(counts != bootstrap_counts(1000, tree_seed(3, 5)));
}

TEST_CASE("JSON round trip is exact") {
  std::vector<int> y;
  const auto x = learnable_set(6, 800, y);
  ForestConfig cfg;
  cfg.n_estimators = 10;
  const auto m = fit_forest(x, y, cfg);
  const auto back = ForestModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  CHECK(back == m);
  for (std::size_t r = 0; r < x.rows(); ++r) CHECK(back.predict_proba(x.row(r)) == m.predict_proba(x.row(r)));
  CHECK(to_json(back.config()) == to_json(m.config()));

  auto j = m.to_json();
  j["trees"][0]["left"][0] = 0;
  CHECK_THROWS_AS(ForestModel::from_json(j), ValidationError);
}

TEST_CASE("default forest beats the base-rate predictor on held-out data") {
  std::vector<int> y_train, y_test;
  const auto x_train = learnable_set(40, 6000, y_train);
  const auto x_test = learnable_set(41, 3000, y_test);
  ForestConfig cfg;
  cfg.seed = 2;
  const auto m = fit_forest(x_train, y_train, cfg);
  CHECK(m.trees().size() == 400);
  const double base = std::count(y_train.begin(), y_train.end(), 1) / double(y_train.size());
  double ll_model = 0, ll_base = 0;
  const auto p = m.predict_proba_batch(x_test);
  for (std::size_t i = 0; i < y_test.size(); ++i) {
    const double q = std::clamp(p[i], 1e-12, 1 - 1e-12);
    ll_model -= y_test[i] ? std::log(q) : std::log(1 - q);
    ll_base -= y_test[i] ? std::log(base) : std::log(1 - base);
  }
  CHECK(ll_model < ll_base);
  for (double v : p) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

}  // TEST_SUITE
