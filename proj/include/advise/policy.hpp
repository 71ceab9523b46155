#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "advise/core.hpp"
#include "advise/dataset.hpp"
#include "advise/forest.hpp"
#include "advise/risk_model.hpp"
#include "advise/rng.hpp"

namespace advise {

/// Everything a policy may look at when deciding whether to advise. The case
/// is stored masked; the outcome is attached only on the Omniscient path.
class AdviceContext {
 public:
  AdviceContext(const DefendantCase& c, double y_hat_alg, GridPrediction y_hat_unassisted, int period,
                std::string participant_id);

  /// Copy of this context carrying the true outcome.
  [[nodiscard]] AdviceContext with_oracle(int outcome) const;

  [[nodiscard]] const MaskedCase& features() const { return features_; }
  [[nodiscard]] double y_hat_alg() const { return y_hat_alg_; }
  [[nodiscard]] GridPrediction y_hat_alg_rounded() const { return y_hat_alg_rounded_; }
  [[nodiscard]] GridPrediction y_hat_unassisted() const { return y_hat_unassisted_; }
  [[nodiscard]] const std::optional<int>& outcome_oracle() const { return outcome_oracle_; }
  [[nodiscard]] int period() const { return period_; }
  [[nodiscard]] const std::string& participant_id() const { return participant_id_; }

 private:
  MaskedCase features_;
  double y_hat_alg_;
  GridPrediction y_hat_alg_rounded_;
  GridPrediction y_hat_unassisted_;
  std::optional<int> outcome_oracle_;
  int period_;
  std::string participant_id_;
};

struct PolicyFeatureOptions {
  bool include_gap = true;  // append |y_hat_alg - y_hat_unassisted|
};

/// Risk features ++ [y_hat_alg, y_hat_unassisted, gap?].
std::vector<double> encode_policy_features(const AdviceContext& ctx, const RiskEncoding& enc,
                                           PolicyFeatureOptions opts = {});
std::size_t policy_feature_count(const RiskEncoding& enc, PolicyFeatureOptions opts);

struct PolicyLabelOptions {
  bool use_rounded_alg = false;
};

/// 1 iff the algorithm is strictly more accurate than the human.
int advise_label(int y, double y_hat_alg, GridPrediction human, PolicyLabelOptions opts = {});

struct PolicyTrainingSet {
  FeatureMatrix x;
  std::vector<int> labels;

  [[nodiscard]] double base_rate() const;
};

PolicyTrainingSet build_policy_training_set(const PredictionDataset& ds, const RiskModel& risk,
                                            PolicyFeatureOptions features = {},
                                            PolicyLabelOptions labels = {});

ForestModel train_learned_policy(const PolicyTrainingSet& ts, const ForestConfig& config = {});

/// Threshold among the distinct scores whose advise frequency (score >= theta)
/// is closest to `target`; ties go to the smaller threshold.
double calibrate_threshold_from_scores(std::span<const double> scores, double target);
double calibrate_threshold(const ForestModel& model, const PolicyTrainingSet& ts);

inline constexpr double kDefaultLearnedThreshold = 0.42;
inline constexpr double kDefaultRandomAdviseProbability = 0.30;

struct AdvisingPolicySpec {
  TreatmentKind kind = TreatmentKind::NoAdvice;
  std::shared_ptr<const ForestModel> model;  // Learned only
  RiskEncoding encoding;                     // Learned only
  PolicyFeatureOptions feature_options;
  PolicyLabelOptions label_options;
  double threshold = kDefaultLearnedThreshold;
  double advise_probability = kDefaultRandomAdviseProbability;
  std::uint64_t seed = 0;

  static AdvisingPolicySpec simple(TreatmentKind kind);
  static AdvisingPolicySpec random(double p, std::uint64_t seed);
  static AdvisingPolicySpec learned(std::shared_ptr<const ForestModel> model, RiskEncoding enc,
                                    double threshold, PolicyFeatureOptions opts = {});

  void validate() const;

  [[nodiscard]] nlohmann::json to_json() const;
  static AdvisingPolicySpec from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static AdvisingPolicySpec load(const std::filesystem::path& path);
};

/// Advise decision. Random draws from `random_stream` (required for Random);
/// Omniscient requires the oracle outcome, every other kind rejects it.
bool decide(const AdvisingPolicySpec& spec, const AdviceContext& ctx, Rng* random_stream = nullptr);

}  // namespace advise
