#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "advise/core.hpp"
#include "advise/dataset.hpp"
#include "advise/policy.hpp"
#include "advise/report.hpp"
#include "advise/rng.hpp"

namespace advise {

/// Behavioral stand-in for a participant. Defaults put the effective
/// influence near 0.77 at 30% advice frequency and 0.32 when always advised.
struct HumanModel {
  double sigma = 0.25;           // perception noise at period 1
  double sigma_target = 0.10;    // level sigma shrinks toward after observed advice
  double learning_rate = 0.02;   // per-period shrinkage
  double zero_anchor = 0.105;    // Pr(predict 0 | perceived < 0.15)
  double influence_base = 0.96;  // a
  double scarcity_slope = 0.64;  // b
  double acceptance = 0.90;      // Pr(exact adoption) = acceptance * effective influence

  static constexpr double kZeroAnchorBelow = 0.15;

  void validate() const;
  /// clamp(a - b * frequency, 0, 1)
  [[nodiscard]] double effective_influence(double advice_frequency) const;
  [[nodiscard]] double acceptance_probability(double advice_frequency) const;
};

/// perceived = clamp(latent + N(0, sigma), 0, 1); with probability z0 when
/// perceived < 0.15 the answer is 0, otherwise the grid-rounded perception.
nlohmann::json to_json(const HumanModel& hm);
/// Missing keys keep their defaults; unknown keys are rejected.
HumanModel human_model_from_json(const nlohmann::json& j);

GridPrediction simulate_initial_prediction(const HumanModel& hm, double latent_risk, double sigma, Rng& rng);

/// Exact adoption with acceptance_probability(freq); otherwise moves the
/// initial prediction by the effective influence toward the advice.
GridPrediction simulate_response(const HumanModel& hm, GridPrediction initial, GridPrediction advice,
                                 double advice_frequency_so_far, Rng& rng);

/// One participant's evolving state across a series.
class SimulatedHuman {
 public:
  SimulatedHuman(HumanModel model, RngSeed stream);

  GridPrediction initial_prediction(double latent_risk);
  GridPrediction respond(GridPrediction initial, GridPrediction advice);
  /// Records whether advice was shown this period; sigma shrinks if so.
  void end_period(bool advised);

  [[nodiscard]] double sigma() const { return sigma_; }
  [[nodiscard]] double advice_frequency_so_far() const;
  [[nodiscard]] int periods_completed() const { return periods_; }

 private:
  HumanModel model_;
  Rng perception_;
  Rng response_;
  double sigma_;
  int periods_ = 0;
  int advised_ = 0;
};

using CaseFunction = std::function<double(const DefendantCase&)>;

/// Unassisted predictions of simulated participants "h<j>", each on a series
/// of `series_length` distinct cases. Stands in for the collected human data.
std::vector<HumanPrediction> simulate_unassisted_predictions(const std::vector<DefendantCase>& cases,
                                                             const CaseFunction& latent_risk,
                                                             const HumanModel& hm, int n_participants,
                                                             int series_length, std::uint64_t seed);

struct ExperimentPlan {
  TreatmentKind treatment = TreatmentKind::NoAdvice;
  int n_participants = 200;
  int series_length = 50;
  std::shared_ptr<const std::vector<DefendantCase>> pool;
  AdvisingPolicySpec policy;
  CaseFunction algorithm;    // y_hat_alg
  CaseFunction latent_risk;  // what simulated humans perceive
  HumanModel human;
  std::uint64_t master_seed = 1;
  int n_threads = 1;

  void validate() const;
};

/// Participant j draws its series and behavior from streams keyed by
/// (master_seed, j) only, so treatments sharing a seed share case series.
std::vector<PredictionRecord> run_treatment_records(const ExperimentPlan& plan);

struct TreatmentRun {
  TreatmentKind treatment;
  std::vector<PredictionRecord> records;
  TreatmentReport report;
};

TreatmentRun run_treatment(const ExperimentPlan& plan, const RaceLookup* race_of,
                           const ReportOptions& opts = {});

struct SuiteSummary {
  struct Row {
    TreatmentKind treatment;
    Estimate quadratic_normal;
    Estimate quadratic_bootstrap;
    double policy_accuracy;
  };
  std::vector<Row> rows;                  // in plan order
  std::vector<TreatmentKind> ranking;     // by mean quadratic score, best first
};

struct SuiteResult {
  std::vector<TreatmentRun> runs;
  SuiteSummary summary;
};

/// Runs every plan; all plans must share pool, series length, participant
/// count, and master seed.
SuiteResult run_suite(const std::vector<ExperimentPlan>& plans, const RaceLookup* race_of,
                      const ReportOptions& opts = {});

std::string render_suite_kv(const SuiteSummary& s);
std::string render_suite_table(const SuiteSummary& s);

}  // namespace advise
