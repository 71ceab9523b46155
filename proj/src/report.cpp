#include "advise/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "advise/dataset.hpp"

namespace advise {

namespace {

using Participants = std::map<std::string, std::vector<PredictionRecord>>;

Participants group_participants(std::span<const PredictionRecord> records) {
  Participants out;
  for (const auto& r : records) {
    if (!is_synthetic_participant(r.participant_id)) out[r.participant_id].push_back(r);
  }
  return out;
}

ScoreReport score_report(std::span<const PredictionRecord> records, const Participants& participants,
                         ScoredPrediction which, const CiOptions& ci) {
  auto scores_of = [&](std::span<const PredictionRecord> recs, auto&& fn) {
    std::vector<double> v;
    v.reserve(recs.size());
    for (const auto& r : recs) v.push_back(fn(r.y, scored_value(r, which).probability()));
    return v;
  };
  auto auc_of = [&](std::span<const PredictionRecord> recs) {
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& r : recs) {
      s.push_back(scored_value(r, which).probability());
      y.push_back(r.y);
    }
    return auc(s, y);
  };

  ScoreReport rep;
  rep.pooled_linear = canonical_mean(scores_of(records, linear_score));
  rep.pooled_quadratic = canonical_mean(scores_of(records, quadratic_score));
  rep.pooled_log = canonical_mean(scores_of(records, log_score));
  rep.pooled_auc = auc_of(records);

  std::vector<double> lin, quad, lg, au;
  for (const auto& [id, recs] : participants) {
    lin.push_back(canonical_mean(scores_of(recs, linear_score)));
    quad.push_back(canonical_mean(scores_of(recs, quadratic_score)));
    lg.push_back(canonical_mean(scores_of(recs, log_score)));
    if (auto a = auc_of(recs)) au.push_back(*a);
  }
  rep.linear = estimate(lin, ci);
  rep.quadratic = estimate(quad, ci);
  rep.log = estimate(lg, ci);
  rep.auc = estimate(au, ci);
  return rep;
}

ResponsivenessReport responsiveness_report(std::span<const PredictionRecord> records,
                                           const Participants& participants, const RaceLookup* race_of,
                                           const CiOptions& ci) {
  ResponsivenessReport rep;
  const auto pooled = advice_influences(records);
  rep.n_influence = pooled.size();
  for (double i : pooled) {
    if (i < kInfluenceFlagLow || i > kInfluenceFlagHigh) ++rep.n_influence_flagged;
  }
  if (!pooled.empty()) rep.pooled_influence = canonical_mean(pooled);
  rep.pooled_acceptance = acceptance_rate(records);
  std::size_t advised = 0;
  for (const auto& r : records) advised += r.z_hat ? 1 : 0;
  rep.pooled_advice_frequency = static_cast<double>(advised) / static_cast<double>(records.size());

  std::vector<double> infl, acc, freq;
  std::vector<double> freq_for_infl, freq_for_acc;
  for (const auto& [id, recs] : participants) {
    std::size_t a = 0;
    for (const auto& r : recs) a += r.z_hat ? 1 : 0;
    const double f = static_cast<double>(a) / static_cast<double>(recs.size());
    freq.push_back(f);
    const auto vals = advice_influences(recs);
    if (!vals.empty()) {
      infl.push_back(canonical_mean(vals));
      freq_for_infl.push_back(f);
    }
    if (auto ar = acceptance_rate(recs)) {
      acc.push_back(*ar);
      freq_for_acc.push_back(f);
    }
  }
  rep.influence = estimate(infl, ci);
  rep.acceptance = estimate(acc, ci);
  rep.advice_frequency = estimate(freq, ci);
  rep.scarcity_influence = scarcity_correlation(freq_for_infl, infl);
  rep.scarcity_acceptance = scarcity_correlation(freq_for_acc, acc);

  if (race_of) {
    std::map<std::string, std::vector<double>> groups;
    for (const auto key : {"black/down", "black/up", "white/down", "white/up"}) groups[key];
    for (const auto& r : records) {
      const auto i = advice_influence(r);
      if (!i) continue;
      const bool up = r.y_hat_alg_rounded > r.y_hat_unassisted;
      groups[std::string(to_string((*race_of)(r.case_id))) + (up ? "/up" : "/down")].push_back(*i);
    }
    for (auto& [key, vals] : groups) {
      rep.grouped_influence[key] = vals.empty() ? std::nullopt : std::optional(canonical_mean(vals));
    }
  }
  return rep;
}

void add_estimate(std::vector<std::pair<std::string, std::string>>& out, const std::string& key,
                  const std::optional<Estimate>& e) {
  out.emplace_back(key + ".mean", format_number(e ? std::optional(e->mean) : std::nullopt));
  out.emplace_back(key + ".ci_low", format_number(e ? std::optional(e->ci_low) : std::nullopt));
  out.emplace_back(key + ".ci_high", format_number(e ? std::optional(e->ci_high) : std::nullopt));
  out.emplace_back(key + ".n", e ? std::to_string(e->n) : "0");
}

void add_scores(std::vector<std::pair<std::string, std::string>>& out, const std::string& prefix,
                const ScoreReport& s) {
  add_estimate(out, prefix + ".linear", s.linear);
  add_estimate(out, prefix + ".quadratic", s.quadratic);
  add_estimate(out, prefix + ".log", s.log);
  add_estimate(out, prefix + ".auc", s.auc);
  out.emplace_back(prefix + ".pooled_linear", format_number(s.pooled_linear));
  out.emplace_back(prefix + ".pooled_quadratic", format_number(s.pooled_quadratic));
  out.emplace_back(prefix + ".pooled_log", format_number(s.pooled_log));
  out.emplace_back(prefix + ".pooled_auc", format_number(s.pooled_auc));
}

void add_correlation(std::vector<std::pair<std::string, std::string>>& out, const std::string& key,
                     const std::optional<Correlation>& c) {
  out.emplace_back(key + ".rho", format_number(c ? std::optional(c->rho) : std::nullopt));
  out.emplace_back(key + ".p_value", format_number(c ? std::optional(c->p_value) : std::nullopt));
  out.emplace_back(key + ".n", c ? std::to_string(c->n) : "0");
}

void add_fairness(std::vector<std::pair<std::string, std::string>>& out, const std::string& prefix,
                  const std::optional<FairnessReport>& f) {
  if (!f) {
    out.emplace_back(prefix, "NA");
    return;
  }
  out.emplace_back(prefix + ".threshold", format_number(f->threshold));
  out.emplace_back(prefix + ".p_y1", format_number(f->p_y1));
  out.emplace_back(prefix + ".fpr_black", format_number(f->black.fpr));
  out.emplace_back(prefix + ".fpr_white", format_number(f->white.fpr));
  out.emplace_back(prefix + ".fnr_black", format_number(f->black.fnr));
  out.emplace_back(prefix + ".fnr_white", format_number(f->white.fnr));
  out.emplace_back(prefix + ".disparity", format_number(f->disparity));
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string format_number(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

TreatmentReport build_treatment_report(std::string label, std::span<const PredictionRecord> records,
                                       const RaceLookup* race_of, const ReportOptions& opts) {
  if (records.empty()) throw ValidationError("report on an empty record set");
  for (const auto& r : records) validate_record(r);
  const auto participants = group_participants(records);

  TreatmentReport rep;
  rep.label = std::move(label);
  rep.n_records = records.size();
  rep.n_participants = participants.size();

  rep.pooled_policy_accuracy = policy_accuracy(records);
  std::vector<double> acc, at_least;
  for (const auto& [id, recs] : participants) {
    acc.push_back(policy_accuracy(recs));
    std::size_t hits = 0;
    for (const auto& r : recs) {
      hits += error_tenths(r.y, r.y_hat_unassisted) <= error_tenths(r.y, r.y_hat_alg_rounded) ? 1 : 0;
    }
    at_least.push_back(static_cast<double>(hits) / static_cast<double>(recs.size()));
  }
  rep.policy_accuracy = estimate(acc, opts.ci);
  rep.initial_at_least_as_accurate = estimate(at_least, opts.ci);

  rep.human_final = score_report(records, participants, ScoredPrediction::Final, opts.ci);
  rep.human_initial = score_report(records, participants, ScoredPrediction::Initial, opts.ci);
  rep.algorithm = score_report(records, participants, ScoredPrediction::AlgorithmRounded, opts.ci);
  rep.responsiveness = responsiveness_report(records, participants, race_of, opts.ci);
  if (race_of) {
    rep.fairness_final = fairness_report(records, *race_of, opts.threshold_rule, ScoredPrediction::Final,
                                         opts.fairness_aggregation);
    rep.fairness_algorithm = fairness_report(records, *race_of, opts.threshold_rule,
                                             ScoredPrediction::AlgorithmRounded, opts.fairness_aggregation);
  }
  rep.learning = learning_report(records, opts.series_length);
  return rep;
}

std::vector<std::pair<std::string, std::string>> report_fields(const TreatmentReport& rep) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("label", rep.label);
  out.emplace_back("n_records", std::to_string(rep.n_records));
  out.emplace_back("n_participants", std::to_string(rep.n_participants));
  add_estimate(out, "policy_accuracy", rep.policy_accuracy);
  out.emplace_back("policy_accuracy.pooled", format_number(rep.pooled_policy_accuracy));
  add_scores(out, "final", rep.human_final);
  add_scores(out, "initial", rep.human_initial);
  add_scores(out, "algorithm", rep.algorithm);
  add_estimate(out, "initial_at_least_as_accurate", rep.initial_at_least_as_accurate);

  const auto& r = rep.responsiveness;
  add_estimate(out, "influence", r.influence);
  out.emplace_back("influence.pooled", format_number(r.pooled_influence));
  out.emplace_back("influence.records", std::to_string(r.n_influence));
  out.emplace_back("influence.flagged_outside_range", std::to_string(r.n_influence_flagged));
  add_estimate(out, "acceptance", r.acceptance);
  out.emplace_back("acceptance.pooled", format_number(r.pooled_acceptance));
  add_estimate(out, "advice_frequency", r.advice_frequency);
  out.emplace_back("advice_frequency.pooled", format_number(r.pooled_advice_frequency));
  add_correlation(out, "scarcity.frequency_vs_influence", r.scarcity_influence);
  add_correlation(out, "scarcity.frequency_vs_acceptance", r.scarcity_acceptance);
  for (const auto& [key, v] : r.grouped_influence) out.emplace_back("influence_by_group." + key, format_number(v));

  add_fairness(out, "fairness.final", rep.fairness_final);
  add_fairness(out, "fairness.algorithm", rep.fairness_algorithm);

  const auto& l = rep.learning;
  out.emplace_back("learning.series_length", std::to_string(l.series_length));
  out.emplace_back("learning.first_half_mean", format_number(l.first_half_mean));
  out.emplace_back("learning.second_half_mean", format_number(l.second_half_mean));
  add_correlation(out, "learning.period_correlation", l.period_correlation);
  out.emplace_back("learning.kl_initial_vs_algorithm", format_number(l.kl_initial_vs_algorithm));
  for (std::size_t t = 0; t < l.per_period_frequency.size(); ++t) {
    out.emplace_back("learning.period." + std::to_string(t + 1), format_number(l.per_period_frequency[t]));
  }
  return out;
}

std::string render_kv(const TreatmentReport& rep) {
  std::ostringstream os;
  for (const auto& [k, v] : report_fields(rep)) os << k << '=' << v << '\n';
  return os.str();
}

std::string render_table(const TreatmentReport& rep) {
  const auto fields = report_fields(rep);
  std::size_t width = 0;
  for (const auto& [k, v] : fields) width = std::max(width, k.size());
  std::ostringstream os;
  os << "Treatment report: " << rep.label << '\n' << std::string(width + 16, '-') << '\n';
  for (const auto& [k, v] : fields) {
    if (k == "label" || k.starts_with("learning.period.")) continue;
    os << k << std::string(width - k.size() + 2, ' ') << v << '\n';
  }
  os << "\nper-period frequency of initial prediction at least as accurate as algorithm:\n";
  for (std::size_t t = 0; t < rep.learning.per_period_frequency.size(); ++t) {
    os << "  period " << (t + 1) << ": " << format_number(rep.learning.per_period_frequency[t]) << '\n';
  }
  return os.str();
}

}  // namespace advise
