#include "advise/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace advise {

namespace {

using json = nlohmann::json;

constexpr int kArrestsCap = 60;
constexpr int kCalibrationDraws = 40000;
// The intercept depends on the population, never on the dataset seed.
constexpr std::uint64_t kCalibrationSeed = 0x5eed0fca11b7a7e5ULL;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void GeneratorConfig::validate() const {
  if (n_cases < 1) throw ValidationError("n_cases must be >= 1");
  if (!(base_violation_rate > 0.0 && base_violation_rate < 1.0)) {
    throw ValidationError("base_violation_rate must lie in (0,1)");
  }
  const auto& m = marginals;
  if (!is_probability(m.p_male) || !is_probability(m.p_black) || !is_probability(m.conviction_fraction)) {
    throw ValidationError("marginal probabilities must lie in [0,1]");
  }
  if (m.offense_weights.size() != offenses.size()) {
    throw ValidationError("offense_weights must have one entry per offense category");
  }
  double total = 0.0;
  for (double w : m.offense_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("offense weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw ValidationError("offense category weights sum to zero");
  if (!(m.age_mean_excess >= 0.0) || m.age_max < kAdultAge) throw ValidationError("invalid age marginal");
  if (!(m.arrests_mean >= 0.0) || !(m.arrests_black_multiplier > 0.0)) {
    throw ValidationError("invalid arrests marginal");
  }
  if (!is_probability(m.fta_base) || !is_probability(m.fta_base + m.fta_slope) || m.fta_slope < 0.0) {
    throw ValidationError("invalid prior_fta marginal");
  }
  if (risk.offense.size() != offenses.size()) {
    throw ValidationError("latent offense effects must have one entry per offense category");
  }
  if (risk.log_arrests <= 0.0 || risk.fta <= 0.0) {
    throw ValidationError("latent risk must increase with prior_arrests and prior_fta");
  }
  if (id_prefix.empty() || id_prefix.find(',') != std::string::npos) {
    throw ValidationError("id_prefix must be non-empty and contain no commas");
  }
}

json to_json(const GeneratorConfig& cfg) {
  const auto& m = cfg.marginals;
  const auto& r = cfg.risk;
  return json{
      {"format", "advise-generator"},
      {"version", 1},
      {"n_cases", cfg.n_cases},
      {"base_violation_rate", cfg.base_violation_rate},
      {"seed", cfg.seed},
      {"id_prefix", cfg.id_prefix},
      {"offense_categories", cfg.offenses.names()},
      {"marginals",
       {{"p_male", m.p_male},
        {"p_black", m.p_black},
        {"offense_weights", m.offense_weights},
        {"age_mean_excess", m.age_mean_excess},
        {"age_max", m.age_max},
        {"arrests_mean", m.arrests_mean},
        {"arrests_black_multiplier", m.arrests_black_multiplier},
        {"conviction_fraction", m.conviction_fraction},
        {"fta_base", m.fta_base},
        {"fta_slope", m.fta_slope}}},
      {"latent_risk",
       {{"log_arrests", r.log_arrests},
        {"fta", r.fta},
        {"age_per_year", r.age_per_year},
        {"conviction_share", r.conviction_share},
        {"male", r.male},
        {"offense", r.offense}}},
  };
}

GeneratorConfig generator_config_from_json(const json& j) {
  GeneratorConfig cfg;
  if (j.value("format", "") != "advise-generator") throw ValidationError("not a generator config file");
  cfg.n_cases = j.at("n_cases").get<int>();
  cfg.base_violation_rate = j.at("base_violation_rate").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.id_prefix = j.at("id_prefix").get<std::string>();
  cfg.offenses = OffenseCategories(j.at("offense_categories").get<std::vector<std::string>>());
  const auto& m = j.at("marginals");
  cfg.marginals.p_male = m.at("p_male");
  cfg.marginals.p_black = m.at("p_black");
  cfg.marginals.offense_weights = m.at("offense_weights").get<std::vector<double>>();
  cfg.marginals.age_mean_excess = m.at("age_mean_excess");
  cfg.marginals.age_max = m.at("age_max");
  cfg.marginals.arrests_mean = m.at("arrests_mean");
  cfg.marginals.arrests_black_multiplier = m.at("arrests_black_multiplier");
  cfg.marginals.conviction_fraction = m.at("conviction_fraction");
  cfg.marginals.fta_base = m.at("fta_base");
  cfg.marginals.fta_slope = m.at("fta_slope");
  const auto& r = j.at("latent_risk");
  cfg.risk.log_arrests = r.at("log_arrests");
  cfg.risk.fta = r.at("fta");
  cfg.risk.age_per_year = r.at("age_per_year");
  cfg.risk.conviction_share = r.at("conviction_share");
  cfg.risk.male = r.at("male");
  cfg.risk.offense = r.at("offense").get<std::vector<double>>();
  cfg.validate();
  return cfg;
}

DefendantCase sample_case_features(const FeatureMarginals& m, const OffenseCategories& offenses, Rng& rng) {
  DefendantCase c;
  c.gender = rng.bernoulli(m.p_male) ? Gender::Male : Gender::Female;
  c.race = rng.bernoulli(m.p_black) ? Race::Black : Race::White;

  const double total = std::accumulate(m.offense_weights.begin(), m.offense_weights.end(), 0.0);
  const double u = rng.uniform() * total;
  std::size_t k = 0;
  double acc = 0.0;
  for (; k + 1 < m.offense_weights.size(); ++k) {
    acc += m.offense_weights[k];
    if (u < acc) break;
  }
  c.offense_type = offenses.names()[k];

  c.age = std::min(m.age_max, kAdultAge + static_cast<int>(rng.exponential(m.age_mean_excess)));

  const double mean = m.arrests_mean * (c.race == Race::Black ? m.arrests_black_multiplier : 1.0);
  if (mean > 0.0) {
    const double p = 1.0 / (1.0 + mean);  // geometric "failures before success"
    double un;
    do {
      un = rng.uniform();
    } while (un <= 0.0);
    c.prior_arrests = std::min(kArrestsCap, static_cast<int>(std::floor(std::log(un) / std::log1p(-p))));
  }
  for (int i = 0; i < c.prior_arrests; ++i) {
    if (rng.bernoulli(m.conviction_fraction)) ++c.prior_convictions;
  }
  const double p_fta = m.fta_base + m.fta_slope * (1.0 - std::exp(-c.prior_arrests / 6.0));
  c.prior_fta = rng.bernoulli(p_fta);
  return c;
}

LatentRisk::LatentRisk(const GeneratorConfig& cfg) : params_(cfg.risk), offenses_(cfg.offenses) {
  cfg.validate();
  Rng rng{RngSeed(kCalibrationSeed)};
  std::vector<double> lin(kCalibrationDraws);
  for (auto& v : lin) v = linear_part(sample_case_features(cfg.marginals, offenses_, rng));

  double lo = -30.0, hi = 30.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double v : lin) mean += sigmoid(mid + v);
    mean /= kCalibrationDraws;
    (mean < cfg.base_violation_rate ? lo : hi) = mid;
  }
  intercept_ = 0.5 * (lo + hi);
}

double LatentRisk::linear_part(const DefendantCase& c) const {
  double x = params_.log_arrests * std::log1p(c.prior_arrests);
  if (c.prior_fta) x += params_.fta;
  x += params_.age_per_year * (c.age - 30);
  x += params_.conviction_share * c.prior_convictions / (1.0 + c.prior_arrests);
  if (c.gender == Gender::Male) x += params_.male;
  x += params_.offense[offenses_.index_of(c.offense_type)];
  return x;
}

double LatentRisk::operator()(const DefendantCase& c) const { return sigmoid(intercept_ + linear_part(c)); }

PredictionDataset generate_synthetic(const GeneratorConfig& cfg) {
  cfg.validate();
  const LatentRisk risk(cfg);
  const RngSeed root(cfg.seed);
  Rng features{root.derive("generator/features")};
  Rng outcomes{root.derive("generator/outcomes")};

  PredictionDataset ds;
  ds.offenses = cfg.offenses;
  ds.cases.reserve(static_cast<std::size_t>(cfg.n_cases));
  for (int i = 0; i < cfg.n_cases; ++i) {
    DefendantCase c = sample_case_features(cfg.marginals, cfg.offenses, features);
    c.id = cfg.id_prefix + std::to_string(i);
    c.outcome = outcomes.bernoulli(risk(c)) ? 1 : 0;
    ds.cases.push_back(std::move(c));
  }
  return ds;
}

}  // namespace advise
