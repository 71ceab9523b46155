#include "advise/risk_model.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "advise/dataset.hpp"
#include "advise/rng.hpp"

namespace advise {

namespace {
using json = nlohmann::json;
constexpr const char* kFormat = "advise-risk-model";
constexpr int kVersion = 1;
}  // namespace

std::vector<std::string> RiskEncoding::feature_names() const {
  std::vector<std::string> names{"age", "prior_arrests", "prior_convictions", "prior_fta"};
  for (const auto& o : offenses_.names()) names.push_back("offense=" + o);
  return names;
}

void RiskEncoding::encode_into(const MaskedCase& c, std::vector<double>& out) const {
  const std::size_t hot = offenses_.index_of(c.offense_type);
  out.push_back(c.age);
  out.push_back(c.prior_arrests);
  out.push_back(c.prior_convictions);
  out.push_back(c.prior_fta ? 1.0 : 0.0);
  for (std::size_t k = 0; k < offenses_.size(); ++k) out.push_back(k == hot ? 1.0 : 0.0);
}

std::vector<double> RiskEncoding::encode(const MaskedCase& c) const {
  std::vector<double> out;
  out.reserve(size());
  encode_into(c, out);
  return out;
}

std::vector<double> encode_risk_features(const DefendantCase& c, const RiskEncoding& enc) {
  return enc.encode(MaskedCase::of(c));
}

RiskModel::RiskModel(RiskEncoding encoding, ForestModel forest, RiskTrainingMetadata meta)
    : encoding_(std::move(encoding)), forest_(std::move(forest)), meta_(meta) {
  if (forest_.n_features() != encoding_.size()) {
    throw ValidationError("risk forest width does not match the feature encoding");
  }
}

double RiskModel::predict(const MaskedCase& c) const { return forest_.predict_proba(encoding_.encode(c)); }
double RiskModel::predict(const DefendantCase& c) const { return predict(MaskedCase::of(c)); }

json RiskModel::to_json() const {
  auto nan_to_null = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  return json{{"format", kFormat},
              {"version", kVersion},
              {"encoding", {{"features", encoding_.feature_names()}, {"offense_categories", encoding_.offenses().names()}}},
              {"metadata",
               {{"train_brier", meta_.train_brier},
                {"holdout_brier", nan_to_null(meta_.holdout_brier)},
                {"n_train", meta_.n_train},
                {"n_holdout", meta_.n_holdout},
                {"seed", meta_.seed}}},
              {"forest", forest_.to_json()}};
}

RiskModel RiskModel::from_json(const json& j) {
  if (j.value("format", "") != kFormat) throw ValidationError("not a risk model file");
  if (j.value("version", 0) != kVersion) throw ValidationError("unsupported risk model version");
  RiskEncoding enc(OffenseCategories(j.at("encoding").at("offense_categories").get<std::vector<std::string>>()));
  if (j["encoding"].at("features").get<std::vector<std::string>>() != enc.feature_names()) {
    throw ValidationError("risk model feature list does not match its encoding");
  }
  const auto& m = j.at("metadata");
  RiskTrainingMetadata meta;
  meta.train_brier = m.at("train_brier");
  meta.holdout_brier = m.at("holdout_brier").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                       : m.at("holdout_brier").get<double>();
  meta.n_train = m.at("n_train");
  meta.n_holdout = m.at("n_holdout");
  meta.seed = m.at("seed");
  return RiskModel(std::move(enc), ForestModel::from_json(j.at("forest")), meta);
}

void RiskModel::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json().dump()); }

RiskModel RiskModel::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

RiskModel train_risk_model(const std::vector<DefendantCase>& cases, const RiskModelConfig& config,
                           const OffenseCategories& offenses) {
  if (cases.size() < 2) throw ValidationError("risk model needs at least 2 cases");
  bool has_pos = false, has_neg = false;
  for (const auto& c : cases) {
    if (!c.outcome) throw ValidationError("case without outcome: " + c.id);
    (*c.outcome ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw ValidationError("risk training set is single-class");
  if (!(config.holdout_fraction >= 0.0 && config.holdout_fraction < 1.0)) {
    throw ValidationError("holdout_fraction must lie in [0,1)");
  }

  const RiskEncoding enc(offenses);
  std::vector<std::size_t> order(cases.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng{RngSeed(config.seed).derive("risk/holdout")};
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  const auto n_holdout = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(cases.size())));

  FeatureMatrix x_train;
  std::vector<int> y_train;
  std::vector<double> row;
  for (std::size_t k = n_holdout; k < order.size(); ++k) {
    const auto& c = cases[order[k]];
    row.clear();
    enc.encode_into(MaskedCase::of(c), row);
    x_train.push_row(row);
    y_train.push_back(*c.outcome);
  }
  ForestConfig fc = config.forest;
  fc.seed = RngSeed(config.seed).derive("risk/forest").value();
  ForestModel forest = fit_forest(x_train, y_train, fc);

  auto brier = [&](std::size_t from, std::size_t to) {
    if (from == to) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (std::size_t k = from; k < to; ++k) {
      const auto& c = cases[order[k]];
      const double e = *c.outcome - forest.predict_proba(enc.encode(MaskedCase::of(c)));
      sum += e * e;
    }
    return sum / static_cast<double>(to - from);
  };
  RiskTrainingMetadata meta;
  meta.train_brier = brier(n_holdout, order.size());
  meta.holdout_brier = brier(0, n_holdout);
  meta.n_train = order.size() - n_holdout;
  meta.n_holdout = n_holdout;
  meta.seed = config.seed;
  return RiskModel(enc, std::move(forest), meta);
}

}  // namespace advise
