#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advise/core.hpp"
#include "advise/rng.hpp"

namespace advise {

// ---- proper scores -------------------------------------------------------

inline constexpr double kLogScoreEpsilon = 1e-6;

double linear_score(int y, double y_hat);     // 1 - |y - y_hat|
double quadratic_score(int y, double y_hat);  // 1 - (y - y_hat)^2
/// ln of the probability given to the realized outcome, y_hat clamped to
/// [eps, 1 - eps].
double log_score(int y, double y_hat);

/// Sum after sorting, so the result does not depend on input order.
double canonical_sum(std::vector<double> values);
double canonical_mean(std::vector<double> values);

/// Mann-Whitney AUC with ties counted one half; absent for single-class input.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);

// ---- advising behavior ---------------------------------------------------

/// Fraction of records where z_hat equals [alg_rounded strictly more accurate
/// than the unassisted prediction]. Throws on empty input.
double policy_accuracy(std::span<const PredictionRecord> records);

/// (assisted - unassisted) / (alg_rounded - unassisted); absent when the record
/// was not advised or the denominator is zero.
std::optional<double> advice_influence(const PredictionRecord& r);
std::vector<double> advice_influences(std::span<const PredictionRecord> records);

/// Pr(assisted == alg_rounded | unassisted != alg_rounded, z_hat).
std::optional<double> acceptance_rate(std::span<const PredictionRecord> records);

/// Observed influence range; values outside are counted, not dropped.
inline constexpr double kInfluenceFlagLow = -6.0;
inline constexpr double kInfluenceFlagHigh = 5.0;

// ---- confidence intervals over participant-level values -----------------

struct CiOptions {
  enum class Method { Normal, Bootstrap };
  Method method = Method::Normal;
  double level = 0.95;
  int bootstrap_rounds = 2000;
  std::uint64_t seed = 0;
};

struct Estimate {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

/// Absent when `values` is empty.
std::optional<Estimate> estimate(std::span<const double> values, const CiOptions& opts = {});

// ---- fairness ------------------------------------------------------------

struct ThresholdRule {
  enum class Kind { Fixed, FScoreOptimal };
  Kind kind = Kind::FScoreOptimal;
  double threshold = 0.3;

  static ThresholdRule fixed(double t) { return {Kind::Fixed, t}; }
  static ThresholdRule f_score_optimal() { return {Kind::FScoreOptimal, 0.0}; }
};

/// Grid threshold t in {0.0, ..., 1.0} maximizing F1 of "high risk iff p > t";
/// ties go to the smallest t.
double f_score_optimal_threshold(std::span<const GridPrediction> predictions, std::span<const int> labels);

struct GroupRates {
  std::optional<double> fpr;
  std::optional<double> fnr;
  std::size_t negatives = 0;
  std::size_t positives = 0;
};

struct FairnessReport {
  GroupRates black;
  GroupRates white;
  double threshold = 0.3;
  double p_y1 = 0.0;
  std::optional<double> disparity;
};

/// Pr(Y=0)(FPR_black - FPR_white) + Pr(Y=1)(FNR_white - FNR_black).
double classification_disparity(double fpr_black, double fpr_white, double fnr_black, double fnr_white,
                                double p_y1);

enum class FairnessAggregation { Pooled, ParticipantAveraged };
enum class ScoredPrediction { Final, Initial, AlgorithmRounded };

GridPrediction scored_value(const PredictionRecord& r, ScoredPrediction which);

using RaceLookup = std::function<Race(const std::string& case_id)>;

FairnessReport fairness_report(std::span<const PredictionRecord> records, const RaceLookup& race_of,
                               ThresholdRule rule, ScoredPrediction which = ScoredPrediction::Final,
                               FairnessAggregation aggregation = FairnessAggregation::Pooled);

// ---- distributions, learning, correlation -------------------------------

using GridPmf = std::array<double, GridPrediction::kPoints>;

GridPmf grid_pmf(std::span<const GridPrediction> values);

inline constexpr double kKlSmoothing = 1e-9;
/// sum p ln(p/q), natural log; q is given kKlSmoothing mass where p > 0 and
/// q = 0. Both inputs must sum to 1 within 1e-9.
double kl_divergence(const GridPmf& p, const GridPmf& q);

struct Correlation {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, Student t with n - 2 dof
  std::size_t n = 0;
};

/// Absent for n < 3 or zero variance.
std::optional<Correlation> pearson(std::span<const double> x, std::span<const double> y);

/// Per-participant advice frequency against responsiveness.
std::optional<Correlation> scarcity_correlation(std::span<const double> advice_frequency,
                                                std::span<const double> responsiveness);

struct LearningReport {
  int series_length = 0;
  /// Index t-1 holds period t; absent for empty periods.
  std::vector<std::optional<double>> per_period_frequency;
  std::optional<double> first_half_mean;   // periods 1..L/2
  std::optional<double> second_half_mean;  // periods L/2+1..L
  std::optional<Correlation> period_correlation;
  double kl_initial_vs_algorithm = 0.0;
};

/// Frequency, per period, of |y - unassisted| <= |y - alg_rounded|. The series
/// length defaults to the largest period present.
LearningReport learning_report(std::span<const PredictionRecord> records, int series_length = 0);

}  // namespace advise
