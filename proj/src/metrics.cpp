#include "advise/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace advise {

namespace {

void check_score_domain(int y, double y_hat) {
  if (y != 0 && y != 1) throw ValidationError("outcome must be 0 or 1");
  if (!(y_hat >= 0.0 && y_hat <= 1.0)) throw ValidationError("prediction outside [0,1]");
}

bool alg_strictly_better(const PredictionRecord& r) {
  return error_tenths(r.y, r.y_hat_alg_rounded) < error_tenths(r.y, r.y_hat_unassisted);
}

double ratio(std::size_t num, std::size_t den) { return static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

double linear_score(int y, double y_hat) {
  check_score_domain(y, y_hat);
  return 1.0 - std::abs(y - y_hat);
}

double quadratic_score(int y, double y_hat) {
  check_score_domain(y, y_hat);
  const double e = y - y_hat;
  return 1.0 - e * e;
}

double log_score(int y, double y_hat) {
  check_score_domain(y, y_hat);
  const double p = std::clamp(y_hat, kLogScoreEpsilon, 1.0 - kLogScoreEpsilon);
  return std::log(y == 1 ? p : 1.0 - p);
}

double canonical_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return std::accumulate(values.begin(), values.end(), 0.0);
}

double canonical_mean(std::vector<double> values) {
  if (values.empty()) throw ValidationError("mean of empty set");
  const auto n = static_cast<double>(values.size());
  return canonical_sum(std::move(values)) / n;
}

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum_pos += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double policy_accuracy(std::span<const PredictionRecord> records) {
  if (records.empty()) throw ValidationError("policy accuracy of an empty record set");
  std::size_t correct = 0;
  for (const auto& r : records) correct += (r.z_hat == alg_strictly_better(r)) ? 1 : 0;
  return ratio(correct, records.size());
}

std::optional<double> advice_influence(const PredictionRecord& r) {
  if (!r.z_hat || !r.y_hat_assisted) return std::nullopt;
  const int den = r.y_hat_alg_rounded.tenths() - r.y_hat_unassisted.tenths();
  if (den == 0) return std::nullopt;
  return static_cast<double>(r.y_hat_assisted->tenths() - r.y_hat_unassisted.tenths()) / den;
}

std::vector<double> advice_influences(std::span<const PredictionRecord> records) {
  std::vector<double> out;
  for (const auto& r : records) {
    if (auto i = advice_influence(r)) out.push_back(*i);
  }
  return out;
}

std::optional<double> acceptance_rate(std::span<const PredictionRecord> records) {
  std::size_t eligible = 0, accepted = 0;
  for (const auto& r : records) {
    if (!r.z_hat || r.y_hat_unassisted == r.y_hat_alg_rounded) continue;
    ++eligible;
    if (r.y_hat_assisted == r.y_hat_alg_rounded) ++accepted;
  }
  if (eligible == 0) return std::nullopt;
  return ratio(accepted, eligible);
}

std::optional<Estimate> estimate(std::span<const double> values, const CiOptions& opts) {
  if (values.empty()) return std::nullopt;
  if (!(opts.level > 0.0 && opts.level < 1.0)) throw ValidationError("CI level must lie in (0,1)");
  Estimate e;
  e.n = values.size();
  e.mean = canonical_mean({values.begin(), values.end()});
  e.ci_low = e.ci_high = e.mean;
  if (e.n < 2) return e;

  if (opts.method == CiOptions::Method::Normal) {
    std::vector<double> sq;
    sq.reserve(e.n);
    for (double v : values) sq.push_back((v - e.mean) * (v - e.mean));
    const double sd = std::sqrt(canonical_sum(std::move(sq)) / static_cast<double>(e.n - 1));
    const double z = boost::math::quantile(boost::math::normal(), 0.5 + opts.level / 2.0);
    const double half = z * sd / std::sqrt(static_cast<double>(e.n));
    e.ci_low = e.mean - half;
    e.ci_high = e.mean + half;
    return e;
  }

  if (opts.bootstrap_rounds < 1) throw ValidationError("bootstrap_rounds must be >= 1");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());  // resampling must not depend on input order
  Rng rng{RngSeed(opts.seed).derive("ci/bootstrap")};
  std::vector<double> means(static_cast<std::size_t>(opts.bootstrap_rounds));
  std::vector<double> sample(e.n);
  for (auto& m : means) {
    for (auto& s : sample) s = sorted[rng.below(e.n)];
    m = canonical_mean(sample);
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - opts.level) / 2.0;
  auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(means.size() - 1)));
    return means[std::min(idx, means.size() - 1)];
  };
  e.ci_low = std::min(at(alpha), e.mean);
  e.ci_high = std::max(at(1.0 - alpha), e.mean);
  return e;
}

double f_score_optimal_threshold(std::span<const GridPrediction> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ValidationError("threshold scan: size mismatch");
  if (predictions.empty()) throw ValidationError("threshold scan on empty set");
  // Counts per grid value; "p > t" for t = k/10 selects tenths k+1..10.
  std::array<std::size_t, GridPrediction::kPoints> pos{}, neg{};
  std::size_t total_pos = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    auto k = static_cast<std::size_t>(predictions[i].tenths());
    if (labels[i] == 1) {
      ++pos[k];
      ++total_pos;
    } else {
      ++neg[k];
    }
  }
  int best_k = 0;
  double best_f = -1.0;
  std::size_t tp = total_pos, fp = predictions.size() - total_pos;
  for (int k = 0; k <= GridPrediction::kSteps; ++k) {
    tp -= pos[static_cast<std::size_t>(k)];
    fp -= neg[static_cast<std::size_t>(k)];
    const std::size_t fn = total_pos - tp;
    const std::size_t denom = 2 * tp + fp + fn;
    const double f = denom == 0 ? 0.0 : ratio(2 * tp, denom);
    if (f > best_f) {
      best_f = f;
      best_k = k;
    }
  }
  return best_k / 10.0;
}

double classification_disparity(double fpr_black, double fpr_white, double fnr_black, double fnr_white,
                                double p_y1) {
  if (!(p_y1 >= 0.0 && p_y1 <= 1.0)) throw ValidationError("Pr(Y=1) outside [0,1]");
  return (1.0 - p_y1) * (fpr_black - fpr_white) + p_y1 * (fnr_white - fnr_black);
}

GridPrediction scored_value(const PredictionRecord& r, ScoredPrediction which) {
  switch (which) {
    case ScoredPrediction::Final: return r.y_hat_final;
    case ScoredPrediction::Initial: return r.y_hat_unassisted;
    case ScoredPrediction::AlgorithmRounded: return r.y_hat_alg_rounded;
  }
  return r.y_hat_final;
}

namespace {

struct GroupCounts {
  std::size_t neg = 0, fp = 0, pos = 0, fn = 0;

  [[nodiscard]] GroupRates rates() const {
    GroupRates g;
    g.negatives = neg;
    g.positives = pos;
    if (neg > 0) g.fpr = ratio(fp, neg);
    if (pos > 0) g.fnr = ratio(fn, pos);
    return g;
  }
};

std::array<GroupCounts, 2> count_groups(std::span<const PredictionRecord> records, const RaceLookup& race_of,
                                        int threshold_tenths, ScoredPrediction which) {
  std::array<GroupCounts, 2> g{};
  for (const auto& r : records) {
    auto& c = g[race_of(r.case_id) == Race::Black ? 0 : 1];
    const bool high = scored_value(r, which).tenths() > threshold_tenths;
    if (r.y == 1) {
      ++c.pos;
      if (!high) ++c.fn;
    } else {
      ++c.neg;
      if (high) ++c.fp;
    }
  }
  return g;
}

std::optional<double> mean_of_present(const std::vector<std::optional<double>>& v) {
  std::vector<double> present;
  for (const auto& x : v) {
    if (x) present.push_back(*x);
  }
  if (present.empty()) return std::nullopt;
  return canonical_mean(std::move(present));
}

}  // namespace

FairnessReport fairness_report(std::span<const PredictionRecord> records, const RaceLookup& race_of,
                               ThresholdRule rule, ScoredPrediction which, FairnessAggregation aggregation) {
  if (records.empty()) throw ValidationError("fairness report on an empty record set");
  FairnessReport rep;
  if (rule.kind == ThresholdRule::Kind::Fixed) {
    if (!(rule.threshold >= 0.0 && rule.threshold <= 1.0)) throw ValidationError("threshold outside [0,1]");
    rep.threshold = rule.threshold;
  } else {
    std::vector<GridPrediction> preds;
    std::vector<int> labels;
    for (const auto& r : records) {
      preds.push_back(scored_value(r, which));
      labels.push_back(r.y);
    }
    rep.threshold = f_score_optimal_threshold(preds, labels);
  }
  // "p > t" on the grid; a threshold between grid points classifies like its floor.
  const int t_tenths = static_cast<int>(std::floor(rep.threshold * 10.0 + 1e-9));

  std::size_t positives = 0;
  for (const auto& r : records) positives += static_cast<std::size_t>(r.y);
  rep.p_y1 = ratio(positives, records.size());

  if (aggregation == FairnessAggregation::Pooled) {
    const auto g = count_groups(records, race_of, t_tenths, which);
    rep.black = g[0].rates();
    rep.white = g[1].rates();
  } else {
    std::map<std::string, std::vector<PredictionRecord>> by_participant;
    for (const auto& r : records) by_participant[r.participant_id].push_back(r);
    std::vector<std::optional<double>> fpr_b, fpr_w, fnr_b, fnr_w;
    std::array<GroupCounts, 2> totals{};
    for (const auto& [id, recs] : by_participant) {
      const auto g = count_groups(recs, race_of, t_tenths, which);
      fpr_b.push_back(g[0].rates().fpr);
      fnr_b.push_back(g[0].rates().fnr);
      fpr_w.push_back(g[1].rates().fpr);
      fnr_w.push_back(g[1].rates().fnr);
      for (int k = 0; k < 2; ++k) {
        totals[k].neg += g[k].neg;
        totals[k].pos += g[k].pos;
      }
    }
    rep.black = {mean_of_present(fpr_b), mean_of_present(fnr_b), totals[0].neg, totals[0].pos};
    rep.white = {mean_of_present(fpr_w), mean_of_present(fnr_w), totals[1].neg, totals[1].pos};
  }
  if (rep.black.fpr && rep.white.fpr && rep.black.fnr && rep.white.fnr) {
    rep.disparity = classification_disparity(*rep.black.fpr, *rep.white.fpr, *rep.black.fnr, *rep.white.fnr,
                                             rep.p_y1);
  }
  return rep;
}

GridPmf grid_pmf(std::span<const GridPrediction> values) {
  if (values.empty()) throw ValidationError("pmf of empty set");
  std::array<std::size_t, GridPrediction::kPoints> counts{};
  for (auto v : values) ++counts[static_cast<std::size_t>(v.tenths())];
  GridPmf pmf{};
  for (std::size_t k = 0; k < pmf.size(); ++k) pmf[k] = ratio(counts[k], values.size());
  return pmf;
}

double kl_divergence(const GridPmf& p, const GridPmf& q) {
  for (const auto* d : {&p, &q}) {
    double s = 0.0;
    for (double v : *d) {
      if (!(v >= 0.0)) throw ValidationError("pmf has a negative entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ValidationError("pmf is not normalized");
  }
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    const double qk = q[k] > 0.0 ? q[k] : kKlSmoothing;
    kl += p[k] * std::log(p[k] / qk);
  }
  return std::max(kl, 0.0);
}

std::optional<Correlation> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: size mismatch");
  const std::size_t n = x.size();
  if (n < 3) return std::nullopt;
  const double mx = canonical_mean({x.begin(), x.end()});
  const double my = canonical_mean({y.begin(), y.end()});
  std::vector<double> sxy, sxx, syy;
  for (std::size_t i = 0; i < n; ++i) {
    sxy.push_back((x[i] - mx) * (y[i] - my));
    sxx.push_back((x[i] - mx) * (x[i] - mx));
    syy.push_back((y[i] - my) * (y[i] - my));
  }
  const double vx = canonical_sum(std::move(sxx));
  const double vy = canonical_sum(std::move(syy));
  if (vx <= 0.0 || vy <= 0.0) return std::nullopt;
  Correlation c;
  c.n = n;
  c.rho = std::clamp(canonical_sum(std::move(sxy)) / std::sqrt(vx * vy), -1.0, 1.0);
  const double dof = static_cast<double>(n - 2);
  if (std::abs(c.rho) >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = c.rho * std::sqrt(dof / (1.0 - c.rho * c.rho));
    c.p_value = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(dof), std::abs(t)));
  }
  return c;
}

std::optional<Correlation> scarcity_correlation(std::span<const double> advice_frequency,
                                                std::span<const double> responsiveness) {
  return pearson(advice_frequency, responsiveness);
}

LearningReport learning_report(std::span<const PredictionRecord> records, int series_length) {
  if (records.empty()) throw ValidationError("learning report on an empty record set");
  LearningReport rep;
  int max_period = 0;
  for (const auto& r : records) max_period = std::max(max_period, r.period);
  rep.series_length = series_length > 0 ? series_length : max_period;
  if (max_period > rep.series_length) throw ValidationError("record period exceeds the series length");

  const auto L = static_cast<std::size_t>(rep.series_length);
  std::vector<std::size_t> hits(L, 0), totals(L, 0);
  std::vector<GridPrediction> initial, alg;
  for (const auto& r : records) {
    const auto t = static_cast<std::size_t>(r.period - 1);
    ++totals[t];
    if (error_tenths(r.y, r.y_hat_unassisted) <= error_tenths(r.y, r.y_hat_alg_rounded)) ++hits[t];
    initial.push_back(r.y_hat_unassisted);
    alg.push_back(r.y_hat_alg_rounded);
  }
  rep.per_period_frequency.resize(L);
  std::vector<double> xs, ys;
  std::size_t h1 = 0, n1 = 0, h2 = 0, n2 = 0;
  const std::size_t half = L / 2;
  for (std::size_t t = 0; t < L; ++t) {
    if (totals[t] == 0) continue;
    const double f = ratio(hits[t], totals[t]);
    rep.per_period_frequency[t] = f;
    xs.push_back(static_cast<double>(t + 1));
    ys.push_back(f);
    (t < half ? h1 : h2) += hits[t];
    (t < half ? n1 : n2) += totals[t];
  }
  if (n1 > 0) rep.first_half_mean = ratio(h1, n1);
  if (n2 > 0) rep.second_half_mean = ratio(h2, n2);
  rep.period_correlation = pearson(xs, ys);
  rep.kl_initial_vs_algorithm = kl_divergence(grid_pmf(initial), grid_pmf(alg));
  return rep;
}

}  // namespace advise
