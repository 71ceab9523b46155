#include "advise/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace advise {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

std::string participant_id(int j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%04d", j);
  return buf;
}

}  // namespace

void HumanModel::validate() const {
  if (!(sigma >= 0.0) || !(sigma_target >= 0.0)) throw ValidationError("human sigma must be >= 0");
  if (!in_unit(zero_anchor) || !in_unit(influence_base) || !in_unit(learning_rate)) {
    throw ValidationError("zero_anchor, influence_base and learning_rate must lie in [0,1]");
  }
  if (!(scarcity_slope >= 0.0)) throw ValidationError("scarcity_slope must be >= 0");
  if (!(acceptance >= 0.0)) throw ValidationError("acceptance must be >= 0");
}

double HumanModel::effective_influence(double advice_frequency) const {
  return std::clamp(influence_base - scarcity_slope * advice_frequency, 0.0, 1.0);
}

double HumanModel::acceptance_probability(double advice_frequency) const {
  return std::clamp(acceptance * effective_influence(advice_frequency), 0.0, 1.0);
}

nlohmann::json to_json(const HumanModel& hm) {
  return {{"sigma", hm.sigma},
          {"sigma_target", hm.sigma_target},
          {"learning_rate", hm.learning_rate},
          {"zero_anchor", hm.zero_anchor},
          {"influence_base", hm.influence_base},
          {"scarcity_slope", hm.scarcity_slope},
          {"acceptance", hm.acceptance}};
}

HumanModel human_model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("human model must be a JSON object");
  HumanModel hm;
  const std::map<std::string, double*> fields = {
      {"sigma", &hm.sigma},           {"sigma_target", &hm.sigma_target},
      {"learning_rate", &hm.learning_rate}, {"zero_anchor", &hm.zero_anchor},
      {"influence_base", &hm.influence_base}, {"scarcity_slope", &hm.scarcity_slope},
      {"acceptance", &hm.acceptance}};
  for (const auto& [k, v] : j.items()) {
    auto it = fields.find(k);
    if (it == fields.end()) throw ValidationError("unknown human model key: " + k);
    if (!v.is_number()) throw ValidationError("human model key " + k + " must be a number");
    *it->second = v.get<double>();
  }
  hm.validate();
  return hm;
}

GridPrediction simulate_initial_prediction(const HumanModel& hm, double latent_risk, double sigma, Rng& rng) {
  const double perceived = std::clamp(latent_risk + rng.normal(0.0, sigma), 0.0, 1.0);
  // The anchor coin is always drawn so streams stay aligned across treatments.
  const bool anchor = rng.bernoulli(hm.zero_anchor);
  if (perceived < HumanModel::kZeroAnchorBelow && anchor) return GridPrediction::from_tenths(0);
  return round_to_grid(perceived);
}

GridPrediction simulate_response(const HumanModel& hm, GridPrediction initial, GridPrediction advice,
                                 double advice_frequency_so_far, Rng& rng) {
  const bool accept = rng.bernoulli(hm.acceptance_probability(advice_frequency_so_far));
  if (accept) return advice;
  const double move = hm.effective_influence(advice_frequency_so_far);
  const double tenths = initial.tenths() + move * (advice.tenths() - initial.tenths());
  return round_to_grid(std::clamp(tenths / GridPrediction::kSteps, 0.0, 1.0));
}

SimulatedHuman::SimulatedHuman(HumanModel model, RngSeed stream)
    : model_(model),
      perception_(stream.derive("perception")),
      response_(stream.derive("response")),
      sigma_(model.sigma) {
  model_.validate();
}

GridPrediction SimulatedHuman::initial_prediction(double latent_risk) {
  return simulate_initial_prediction(model_, latent_risk, sigma_, perception_);
}

GridPrediction SimulatedHuman::respond(GridPrediction initial, GridPrediction advice) {
  return simulate_response(model_, initial, advice, advice_frequency_so_far(), response_);
}

void SimulatedHuman::end_period(bool advised) {
  ++periods_;
  if (advised) {
    ++advised_;
    sigma_ -= model_.learning_rate * (sigma_ - model_.sigma_target);
  }
}

double SimulatedHuman::advice_frequency_so_far() const {
  return periods_ == 0 ? 0.0 : static_cast<double>(advised_) / periods_;
}

std::vector<HumanPrediction> simulate_unassisted_predictions(const std::vector<DefendantCase>& cases,
                                                             const CaseFunction& latent_risk,
                                                             const HumanModel& hm, int n_participants,
                                                             int series_length, std::uint64_t seed) {
  if (n_participants < 0) throw ValidationError("participant count must be >= 0");
  if (series_length < 1 || static_cast<std::size_t>(series_length) > cases.size()) {
    throw ValidationError("series length must lie in [1, number of cases]");
  }
  const RngSeed root = RngSeed(seed).derive("unassisted");
  std::vector<HumanPrediction> out;
  out.reserve(static_cast<std::size_t>(n_participants) * series_length);
  for (int j = 0; j < n_participants; ++j) {
    const RngSeed stream = root.derive("participant", static_cast<std::uint64_t>(j));
    Rng series_rng{stream.derive("series")};
    std::vector<std::size_t> order(cases.size());
    std::iota(order.begin(), order.end(), 0);
    SimulatedHuman human(hm, stream.derive("human"));
    const std::string pid = "h" + std::to_string(j);
    for (int k = 0; k < series_length; ++k) {
      std::swap(order[k], order[k + series_rng.below(order.size() - k)]);
      const auto& c = cases[order[k]];
      out.push_back({c.id, pid, human.initial_prediction(latent_risk(c))});
      human.end_period(false);
    }
  }
  return out;
}

void ExperimentPlan::validate() const {
  if (n_participants < 1) throw ValidationError("n_participants must be >= 1");
  if (series_length < 1) throw ValidationError("series_length must be >= 1");
  if (!pool || pool->empty()) throw ValidationError("experiment case pool is empty");
  if (static_cast<std::size_t>(series_length) > pool->size()) {
    throw ValidationError("series_length exceeds the case pool size");
  }
  for (const auto& c : *pool) {
    if (!c.outcome) throw ValidationError("pool case without outcome: " + c.id);
  }
  if (!algorithm || !latent_risk) throw ValidationError("plan needs algorithm and latent risk functions");
  if (policy.kind != treatment) throw ValidationError("policy kind does not match the plan treatment");
  if (n_threads < 0) throw ValidationError("n_threads must be >= 0");
  policy.validate();
  human.validate();
}

std::vector<PredictionRecord> run_treatment_records(const ExperimentPlan& plan) {
  plan.validate();
  const auto& pool = *plan.pool;
  std::vector<double> alg(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    alg[i] = plan.algorithm(pool[i]);
    if (!in_unit(alg[i])) throw ValidationError("algorithm prediction outside [0,1] for case " + pool[i].id);
  }
  const RngSeed root(plan.master_seed);
  const auto L = static_cast<std::size_t>(plan.series_length);

  auto run_participant = [&](int j, PredictionRecord* out) {
    const RngSeed stream = root.derive("participant", static_cast<std::uint64_t>(j));
    Rng series_rng{stream.derive("series")};
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = 0; k < L; ++k) {
      std::swap(order[k], order[k + series_rng.below(order.size() - k)]);
    }
    SimulatedHuman human(plan.human, stream.derive("human"));
    Rng policy_rng{stream.derive("policy").derive(to_string(plan.treatment))};
    const std::string pid = participant_id(j);
    for (std::size_t k = 0; k < L; ++k) {
      const auto& c = pool[order[k]];
      const int period = static_cast<int>(k + 1);
      const GridPrediction initial = human.initial_prediction(plan.latent_risk(c));
      const double y_alg = alg[order[k]];
      AdviceContext ctx(c, y_alg, initial, period, pid);
      if (plan.treatment == TreatmentKind::Omniscient) ctx = ctx.with_oracle(*c.outcome);
      const bool advised = decide(plan.policy, ctx, &policy_rng);
      std::optional<GridPrediction> assisted;
      if (advised) assisted = human.respond(initial, ctx.y_hat_alg_rounded());
      out[k] = make_record(c.id, pid, period, *c.outcome, initial, y_alg, advised, assisted);
      human.end_period(advised);
    }
  };

  std::vector<PredictionRecord> records(static_cast<std::size_t>(plan.n_participants) * L);
  const auto n = static_cast<std::size_t>(plan.n_participants);
  std::size_t n_threads = plan.n_threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                              : static_cast<std::size_t>(plan.n_threads);
  n_threads = std::min(n_threads, n);
  if (n_threads <= 1) {
    for (std::size_t j = 0; j < n; ++j) run_participant(static_cast<int>(j), &records[j * L]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < n_threads; ++w) {
      workers.emplace_back([&] {
        for (std::size_t j; (j = next.fetch_add(1)) < n;) run_participant(static_cast<int>(j), &records[j * L]);
      });
    }
  }
  return records;
}

TreatmentRun run_treatment(const ExperimentPlan& plan, const RaceLookup* race_of, const ReportOptions& opts) {
  TreatmentRun run{plan.treatment, run_treatment_records(plan), {}};
  ReportOptions o = opts;
  if (o.series_length == 0) o.series_length = plan.series_length;
  run.report = build_treatment_report(std::string(to_string(plan.treatment)), run.records, race_of, o);
  return run;
}

SuiteResult run_suite(const std::vector<ExperimentPlan>& plans, const RaceLookup* race_of,
                      const ReportOptions& opts) {
  if (plans.empty()) throw ValidationError("suite has no plans");
  for (const auto& p : plans) {
    if (p.pool != plans.front().pool && (!p.pool || !plans.front().pool || *p.pool != *plans.front().pool)) {
      throw ValidationError("suite plans use different case pools");
    }
    if (p.series_length != plans.front().series_length || p.n_participants != plans.front().n_participants ||
        p.master_seed != plans.front().master_seed) {
      throw ValidationError("suite plans must share series length, participant count and seed");
    }
  }
  SuiteResult res;
  for (const auto& p : plans) {
    res.runs.push_back(run_treatment(p, race_of, opts));
    const auto& rep = res.runs.back().report;
    std::vector<double> per_participant;
    std::map<std::string, std::vector<double>> q;
    for (const auto& r : res.runs.back().records) {
      q[r.participant_id].push_back(quadratic_score(r.y, r.y_hat_final.probability()));
    }
    for (auto& [id, v] : q) per_participant.push_back(canonical_mean(v));
    CiOptions boot = opts.ci;
    boot.method = CiOptions::Method::Bootstrap;
    boot.seed = RngSeed(p.master_seed).derive("suite/bootstrap").derive(to_string(p.treatment)).value();
    res.summary.rows.push_back({p.treatment, *estimate(per_participant, opts.ci), *estimate(per_participant, boot),
                                rep.pooled_policy_accuracy});
  }
  std::vector<std::size_t> idx(res.summary.rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    return res.summary.rows[a].quadratic_normal.mean > res.summary.rows[b].quadratic_normal.mean;
  });
  for (auto i : idx) res.summary.ranking.push_back(res.summary.rows[i].treatment);
  return res;
}

std::string render_suite_kv(const SuiteSummary& s) {
  std::ostringstream os;
  for (const auto& r : s.rows) {
    const std::string k = "suite." + std::string(to_string(r.treatment));
    os << k << ".quadratic.mean=" << format_number(r.quadratic_normal.mean) << '\n'
       << k << ".quadratic.ci_low=" << format_number(r.quadratic_normal.ci_low) << '\n'
       << k << ".quadratic.ci_high=" << format_number(r.quadratic_normal.ci_high) << '\n'
       << k << ".quadratic.bootstrap_ci_low=" << format_number(r.quadratic_bootstrap.ci_low) << '\n'
       << k << ".quadratic.bootstrap_ci_high=" << format_number(r.quadratic_bootstrap.ci_high) << '\n'
       << k << ".policy_accuracy=" << format_number(r.policy_accuracy) << '\n';
  }
  os << "suite.ranking=";
  for (std::size_t i = 0; i < s.ranking.size(); ++i) os << (i ? "," : "") << to_string(s.ranking[i]);
  os << '\n';
  return os.str();
}

std::string render_suite_table(const SuiteSummary& s) {
  std::ostringstream os;
  os << "treatment    quadratic  95% CI (normal)        95% CI (bootstrap)     policy accuracy\n";
  for (const auto& r : s.rows) {
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %.4f     [%.4f, %.4f]       [%.4f, %.4f]       %.4f\n",
                  std::string(to_string(r.treatment)).c_str(), r.quadratic_normal.mean, r.quadratic_normal.ci_low,
                  r.quadratic_normal.ci_high, r.quadratic_bootstrap.ci_low, r.quadratic_bootstrap.ci_high,
                  r.policy_accuracy);
    os << line;
  }
  os << "ranking (best first):";
  for (auto t : s.ranking) os << ' ' << to_string(t);
  os << '\n';
  return os.str();
}

}  // namespace advise
