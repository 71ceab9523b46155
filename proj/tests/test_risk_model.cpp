#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "advise/metrics.hpp"
#include "advise/risk_model.hpp"
#include "advise/synthetic.hpp"
#include "helpers.hpp"

using namespace advise;
using testutil::make_case;

namespace {

std::vector<DefendantCase> synthetic_cases(int n, std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.n_cases = n;
  cfg.seed = seed;
  return generate_synthetic(cfg).cases;
}

RiskModelConfig small_config(std::uint64_t seed) {
  RiskModelConfig cfg;
  cfg.forest.n_estimators = 20;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE("risk-model") {

TEST_CASE("encoding layout") {
  const auto v = encode_risk_features(make_case("a", 35, 10, 3, false, "property"));
  REQUIRE(v.size() == 8);
  CHECK(v[0] == 35);
  CHECK(v[1] == 10);
  CHECK(v[2] == 3);
  CHECK(v[3] == 0);
  CHECK(std::count(v.begin() + 4, v.end(), 1.0) == 1);
  CHECK(std::count(v.begin() + 4, v.end(), 0.0) == 3);
  CHECK(RiskEncoding().feature_names().size() == 8);
  CHECK_THROWS_WITH_AS(encode_risk_features(make_case("a", 35, 10, 3, false, "arson")), doctest::Contains("arson"),
                       ValidationError);
}

TEST_CASE("race and gender do not reach the encoding") {
  const auto base = make_case("a", 35, 10, 3, true, "drug", 1, Race::White, Gender::Male);
  const auto other = make_case("a", 35, 10, 3, true, "drug", 1, Race::Black, Gender::Female);
  CHECK(encode_risk_features(base) == encode_risk_features(other));
}

TEST_CASE("age difference shows only at index 0") {
  const auto a = encode_risk_features(make_case("a", 35));
  const auto b = encode_risk_features(make_case("a", 52));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] != b[i]) == (i == 0));
}

TEST_CASE("separable toy data reaches a high held-out quadratic score") {
  auto cases = synthetic_cases(2000, 3);
  for (auto& c : cases) c.outcome = c.prior_arrests >= 3 ? 1 : 0;
  auto cfg = small_config(4);
  cfg.holdout_fraction = 0.25;
  const auto model = train_risk_model(cases, cfg);
  CHECK(model.metadata().n_holdout == 500);
  CHECK(model.metadata().n_train == 1500);
  CHECK(1.0 - model.metadata().holdout_brier > 0.9);
  // Independent recomputation over every case.
  double q = 0;
  for (const auto& c : cases) q += quadratic_score(*c.outcome, model.predict(c));
  CHECK(q / cases.size() > 0.9);
}

TEST_CASE("single-class and missing-outcome inputs are rejected") {
  auto cases = synthetic_cases(200, 5);
  for (auto& c : cases) c.outcome = 1;
  CHECK_THROWS_WITH_AS(train_risk_model(cases, small_config(1)), doctest::Contains("single-class"), ValidationError);
  cases[3].outcome.reset();
  CHECK_THROWS_AS(train_risk_model(cases, small_config(1)), ValidationError);
  CHECK_THROWS_AS(train_risk_model({make_case("a")}, small_config(1)), ValidationError);
}

TEST_CASE("training is deterministic and predictions stay in range") {
  const auto cases = synthetic_cases(1500, 6);
  const auto a = train_risk_model(cases, small_config(7));
  const auto b = train_risk_model(cases, small_config(7));
  bool any_extreme = false;
  for (const auto& c : cases) {
    const double p = a.predict(c);
    CHECK(p == b.predict(c));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    any_extreme = any_extreme || p == 0.0 || p == 1.0;
  }
  CHECK_FALSE(any_extreme);
}

TEST_CASE("permuting race and gender changes no prediction") {
  const auto cases = synthetic_cases(800, 8);
  const auto model = train_risk_model(cases, small_config(9));
  for (auto c : cases) {
    const double p = model.predict(c);
    c.race = c.race == Race::Black ? Race::White : Race::Black;
    c.gender = c.gender == Gender::Male ? Gender::Female : Gender::Male;
    CHECK(model.predict(c) == p);
  }
}

TEST_CASE("an overfit tree memorizes its training cases") {
  const auto cases = synthetic_cases(300, 10);
  RiskModelConfig cfg;
  cfg.forest = ForestConfig{.n_estimators = 1, .min_samples_split = 2, .min_samples_leaf = 1, .max_features = 8,
                            .max_depth = -1, .bootstrap = false};
  cfg.holdout_fraction = 0.0;
  const auto model = train_risk_model(cases, cfg);
  std::map<std::vector<double>, std::set<int>> outcomes;
  for (const auto& c : cases) outcomes[encode_risk_features(c)].insert(*c.outcome);
  int checked = 0;
  for (const auto& c : cases) {
    if (outcomes[encode_risk_features(c)].size() != 1) continue;
    CHECK(std::abs(model.predict(c) - *c.outcome) < 0.1);
    ++checked;
  }
  CHECK(checked > 250);
}

TEST_CASE("reported training Brier equals one minus the mean quadratic score") {
  const auto cases = synthetic_cases(1000, 11);
  auto cfg = small_config(12);
  cfg.holdout_fraction = 0.0;
  const auto model = train_risk_model(cases, cfg);
  std::vector<double> q;
  for (const auto& c : cases) q.push_back(quadratic_score(*c.outcome, model.predict(c)));
  CHECK(model.metadata().train_brier == doctest::Approx(1.0 - canonical_mean(q)).epsilon(1e-12));
  CHECK(std::isnan(model.metadata().holdout_brier));
}

TEST_CASE("model files reload bit-exactly") {
  const auto cases = synthetic_cases(600, 13);
  const auto model = train_risk_model(cases, small_config(14));
  const auto dir = testutil::temp_dir("risk");
  model.save(dir / "risk.json");
  const auto back = RiskModel::load(dir / "risk.json");
  for (const auto& c : cases) CHECK(back.predict(c) == model.predict(c));
  CHECK(back.metadata().holdout_brier == model.metadata().holdout_brier);

  auto j = model.to_json();
  j["format"] = "something-else";
  CHECK_THROWS_AS(RiskModel::from_json(j), ValidationError);
  write_file_atomic(dir / "broken.json", "{not json");
  CHECK_THROWS_AS(RiskModel::load(dir / "broken.json"), ValidationError);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
