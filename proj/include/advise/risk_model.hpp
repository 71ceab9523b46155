#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "advise/core.hpp"
#include "advise/forest.hpp"

namespace advise {

/// Encoding of a race- and gender-free case into model features:
/// [age, prior_arrests, prior_convictions, prior_fta, one-hot(offense_type)].
class RiskEncoding {
 public:
  RiskEncoding() = default;
  explicit RiskEncoding(OffenseCategories offenses) : offenses_(std::move(offenses)) {}

  [[nodiscard]] std::size_t size() const { return 4 + offenses_.size(); }
  [[nodiscard]] std::vector<std::string> feature_names() const;
  [[nodiscard]] const OffenseCategories& offenses() const { return offenses_; }

  void encode_into(const MaskedCase& c, std::vector<double>& out) const;
  [[nodiscard]] std::vector<double> encode(const MaskedCase& c) const;

 private:
  OffenseCategories offenses_;
};

std::vector<double> encode_risk_features(const DefendantCase& c, const RiskEncoding& enc = {});

struct RiskModelConfig {
  ForestConfig forest{.n_estimators = 100, .min_samples_split = 100, .min_samples_leaf = 50, .max_features = 3};
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct RiskTrainingMetadata {
  double train_brier = 0.0;
  double holdout_brier = 0.0;  // NaN when no holdout rows
  std::size_t n_train = 0;
  std::size_t n_holdout = 0;
  std::uint64_t seed = 0;
};

/// Brier-loss-minimizing probability model over race/gender-free features.
class RiskModel {
 public:
  RiskModel(RiskEncoding encoding, ForestModel forest, RiskTrainingMetadata meta);

  [[nodiscard]] double predict(const DefendantCase& c) const;
  [[nodiscard]] double predict(const MaskedCase& c) const;

  [[nodiscard]] const RiskEncoding& encoding() const { return encoding_; }
  [[nodiscard]] const ForestModel& forest() const { return forest_; }
  [[nodiscard]] const RiskTrainingMetadata& metadata() const { return meta_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static RiskModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static RiskModel load(const std::filesystem::path& path);

 private:
  RiskEncoding encoding_;
  ForestModel forest_;
  RiskTrainingMetadata meta_;
};

/// Splits off a seeded holdout, fits the forest on the rest, and records the
/// Brier loss on both parts.
RiskModel train_risk_model(const std::vector<DefendantCase>& cases, const RiskModelConfig& config,
                           const OffenseCategories& offenses = {});

}  // namespace advise
