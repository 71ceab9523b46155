#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advise/core.hpp"
#include "advise/metrics.hpp"

namespace advise {

/// Participant-level estimates plus pooled (record-level) values for one
/// prediction stream.
struct ScoreReport {
  std::optional<Estimate> linear, quadratic, log, auc;
  double pooled_linear = 0.0;
  double pooled_quadratic = 0.0;
  double pooled_log = 0.0;
  std::optional<double> pooled_auc;
};

struct ResponsivenessReport {
  std::optional<Estimate> influence;
  std::optional<Estimate> acceptance;
  std::optional<Estimate> advice_frequency;
  std::optional<double> pooled_influence;
  std::optional<double> pooled_acceptance;
  double pooled_advice_frequency = 0.0;
  std::size_t n_influence = 0;
  std::size_t n_influence_flagged = 0;  // outside [-6, 5]
  std::optional<Correlation> scarcity_influence;   // frequency vs influence
  std::optional<Correlation> scarcity_acceptance;  // frequency vs acceptance
  /// Pooled influence keyed "<race>/<up|down>" (advice above/below initial).
  std::map<std::string, std::optional<double>> grouped_influence;
};

struct TreatmentReport {
  std::string label;
  std::size_t n_records = 0;
  std::size_t n_participants = 0;
  std::optional<Estimate> policy_accuracy;
  double pooled_policy_accuracy = 0.0;
  ScoreReport human_final;
  ScoreReport human_initial;
  ScoreReport algorithm;  // rounded algorithm predictions
  std::optional<Estimate> initial_at_least_as_accurate;
  ResponsivenessReport responsiveness;
  std::optional<FairnessReport> fairness_final;
  std::optional<FairnessReport> fairness_algorithm;
  LearningReport learning;
};

struct ReportOptions {
  CiOptions ci;
  ThresholdRule threshold_rule = ThresholdRule::f_score_optimal();
  FairnessAggregation fairness_aggregation = FairnessAggregation::Pooled;
  int series_length = 0;
};

/// Participant-level statistics skip synthetic ("synth:") participants;
/// pooled values use every record. Fairness needs `race_of`.
TreatmentReport build_treatment_report(std::string label, std::span<const PredictionRecord> records,
                                       const RaceLookup* race_of, const ReportOptions& opts = {});

/// Ordered key/value view shared by both renderers.
std::vector<std::pair<std::string, std::string>> report_fields(const TreatmentReport& rep);

/// key=value lines.
std::string render_kv(const TreatmentReport& rep);
/// Aligned two-column table.
std::string render_table(const TreatmentReport& rep);

std::string format_number(double v);
std::string format_number(const std::optional<double>& v);

}  // namespace advise
