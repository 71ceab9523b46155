#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "advise/core.hpp"
#include "advise/dataset.hpp"
#include "advise/rng.hpp"

namespace advise {

/// Feature marginals of the synthetic defendant population.
struct FeatureMarginals {
  double p_male = 0.80;
  double p_black = 0.50;
  std::vector<double> offense_weights = {0.25, 0.35, 0.30, 0.10};  // aligned with offense categories
  double age_mean_excess = 14.0;  // years above 18, exponential
  int age_max = 75;
  double arrests_mean = 3.0;      // geometric
  double arrests_black_multiplier = 1.35;
  double conviction_fraction = 0.45;  // binomial over arrests
  double fta_base = 0.08;
  double fta_slope = 0.55;  // p_fta = base + slope * (1 - exp(-arrests / 6))
};

/// Logistic ground-truth risk. The intercept is solved so the population mean
/// of the risk equals the configured base rate.
struct LatentRiskParams {
  double log_arrests = 0.55;     // per ln(1 + arrests)
  double fta = 0.70;
  double age_per_year = -0.035;  // relative to age 30
  double conviction_share = 0.40; // per convictions / (1 + arrests)
  double male = 0.20;
  std::vector<double> offense = {0.0, 0.25, 0.15, 0.10};
};

struct GeneratorConfig {
  int n_cases = 1000;
  double base_violation_rate = 0.298;
  FeatureMarginals marginals;
  LatentRiskParams risk;
  OffenseCategories offenses;
  std::string id_prefix = "c";
  std::uint64_t seed = 1;

  /// Throws ValidationError on degenerate or inconsistent settings.
  void validate() const;
};

nlohmann::json to_json(const GeneratorConfig& cfg);
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

/// Ground-truth risk function shared by the generator and the simulated humans.
class LatentRisk {
 public:
  explicit LatentRisk(const GeneratorConfig& cfg);

  [[nodiscard]] double operator()(const DefendantCase& c) const;
  [[nodiscard]] double intercept() const { return intercept_; }

 private:
  [[nodiscard]] double linear_part(const DefendantCase& c) const;

  LatentRiskParams params_;
  OffenseCategories offenses_;
  double intercept_ = 0.0;
};

/// Draws one defendant's features (no outcome).
DefendantCase sample_case_features(const FeatureMarginals& m, const OffenseCategories& offenses, Rng& rng);

/// Cases only; outcomes are Bernoulli(LatentRisk).
PredictionDataset generate_synthetic(const GeneratorConfig& cfg);

}  // namespace advise
