#include "advise/policy.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace advise {

namespace {
using json = nlohmann::json;
constexpr const char* kFormat = "advise-policy";
constexpr int kVersion = 1;
}  // namespace

AdviceContext::AdviceContext(const DefendantCase& c, double y_hat_alg, GridPrediction y_hat_unassisted,
                             int period, std::string participant_id)
    : features_(MaskedCase::of(c)),
      y_hat_alg_(y_hat_alg),
      y_hat_alg_rounded_(round_to_grid(y_hat_alg)),
      y_hat_unassisted_(y_hat_unassisted),
      period_(period),
      participant_id_(std::move(participant_id)) {}

AdviceContext AdviceContext::with_oracle(int outcome) const {
  if (outcome != 0 && outcome != 1) throw ValidationError("oracle outcome must be 0 or 1");
  AdviceContext c = *this;
  c.outcome_oracle_ = outcome;
  return c;
}

std::size_t policy_feature_count(const RiskEncoding& enc, PolicyFeatureOptions opts) {
  return enc.size() + (opts.include_gap ? 3 : 2);
}

std::vector<double> encode_policy_features(const AdviceContext& ctx, const RiskEncoding& enc,
                                           PolicyFeatureOptions opts) {
  std::vector<double> out;
  out.reserve(policy_feature_count(enc, opts));
  enc.encode_into(ctx.features(), out);
  const double human = ctx.y_hat_unassisted().probability();
  out.push_back(ctx.y_hat_alg());
  out.push_back(human);
  if (opts.include_gap) out.push_back(std::abs(ctx.y_hat_alg() - human));
  return out;
}

int advise_label(int y, double y_hat_alg, GridPrediction human, PolicyLabelOptions opts) {
  if (opts.use_rounded_alg) return error_tenths(y, round_to_grid(y_hat_alg)) < error_tenths(y, human) ? 1 : 0;
  return std::abs(y - y_hat_alg) < std::abs(y - human.probability()) ? 1 : 0;
}

double PolicyTrainingSet::base_rate() const {
  if (labels.empty()) throw ValidationError("empty policy training set");
  std::size_t pos = 0;
  for (int l : labels) pos += static_cast<std::size_t>(l);
  return static_cast<double>(pos) / static_cast<double>(labels.size());
}

PolicyTrainingSet build_policy_training_set(const PredictionDataset& ds, const RiskModel& risk,
                                            PolicyFeatureOptions features, PolicyLabelOptions labels) {
  const auto index = ds.case_index();
  std::unordered_map<std::string, double> alg_cache;
  PolicyTrainingSet ts;
  for (std::size_t i = 0; i < ds.predictions.size(); ++i) {
    const auto& p = ds.predictions[i];
    const auto it = index.find(p.case_id);
    if (it == index.end()) throw ValidationError("prediction references unknown case_id '" + p.case_id + "'");
    const auto& c = ds.cases[it->second];
    if (!c.outcome) throw ValidationError("case without outcome: " + c.id);
    auto [cached, inserted] = alg_cache.try_emplace(c.id, 0.0);
    if (inserted) cached->second = risk.predict(c);
    const AdviceContext ctx(c, cached->second, p.value, 1, p.participant_id);
    ts.x.push_row(encode_policy_features(ctx, risk.encoding(), features));
    ts.labels.push_back(advise_label(*c.outcome, cached->second, p.value, labels));
  }
  return ts;
}

ForestModel train_learned_policy(const PolicyTrainingSet& ts, const ForestConfig& config) {
  return fit_forest(ts.x, ts.labels, config);
}

double calibrate_threshold_from_scores(std::span<const double> scores, double target) {
  if (scores.empty()) throw ValidationError("cannot calibrate on an empty score set");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double best_theta = sorted.front();
  double best_gap = std::abs(1.0 - target);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] == sorted[i - 1]) continue;
    const double freq = static_cast<double>(sorted.size() - i) / n;
    const double gap = std::abs(freq - target);
    if (gap < best_gap) {
      best_gap = gap;
      best_theta = sorted[i];
    }
  }
  return best_theta;
}

double calibrate_threshold(const ForestModel& model, const PolicyTrainingSet& ts) {
  const std::vector<double> scores = model.predict_proba_batch(ts.x);
  return calibrate_threshold_from_scores(scores, ts.base_rate());
}

AdvisingPolicySpec AdvisingPolicySpec::simple(TreatmentKind kind) {
  if (kind == TreatmentKind::Learned || kind == TreatmentKind::Random) {
    throw ValidationError(std::string(to_string(kind)) + " policy needs parameters");
  }
  AdvisingPolicySpec s;
  s.kind = kind;
  return s;
}

AdvisingPolicySpec AdvisingPolicySpec::random(double p, std::uint64_t seed) {
  AdvisingPolicySpec s;
  s.kind = TreatmentKind::Random;
  s.advise_probability = p;
  s.seed = seed;
  s.validate();
  return s;
}

AdvisingPolicySpec AdvisingPolicySpec::learned(std::shared_ptr<const ForestModel> model, RiskEncoding enc,
                                               double threshold, PolicyFeatureOptions opts) {
  AdvisingPolicySpec s;
  s.kind = TreatmentKind::Learned;
  s.model = std::move(model);
  s.encoding = std::move(enc);
  s.threshold = threshold;
  s.feature_options = opts;
  s.validate();
  return s;
}

void AdvisingPolicySpec::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("policy threshold outside [0,1]");
  if (!(advise_probability >= 0.0 && advise_probability <= 1.0)) {
    throw ValidationError("advise probability outside [0,1]");
  }
  if (kind == TreatmentKind::Learned) {
    if (!model) throw ValidationError("Learned policy without a model");
    if (model->n_features() != policy_feature_count(encoding, feature_options)) {
      throw ValidationError("policy model width does not match its feature encoding");
    }
  }
}

json AdvisingPolicySpec::to_json() const {
  json header{{"kind", to_string(kind)},
              {"threshold", threshold},
              {"advise_probability", advise_probability},
              {"seed", seed},
              {"include_gap", feature_options.include_gap},
              {"label_uses_rounded_alg", label_options.use_rounded_alg},
              {"offense_categories", encoding.offenses().names()}};
  json j{{"format", kFormat}, {"version", kVersion}, {"header", header}};
  j["forest"] = model ? model->to_json() : json(nullptr);
  return j;
}

AdvisingPolicySpec AdvisingPolicySpec::from_json(const json& j) {
  if (j.value("format", "") != kFormat) throw ValidationError("not a policy file");
  if (j.value("version", 0) != kVersion) throw ValidationError("unsupported policy version");
  const auto& h = j.at("header");
  AdvisingPolicySpec s;
  s.kind = parse_treatment(h.at("kind").get<std::string>());
  s.threshold = h.at("threshold");
  s.advise_probability = h.at("advise_probability");
  s.seed = h.at("seed");
  s.feature_options.include_gap = h.at("include_gap");
  s.label_options.use_rounded_alg = h.at("label_uses_rounded_alg");
  s.encoding = RiskEncoding(OffenseCategories(h.at("offense_categories").get<std::vector<std::string>>()));
  if (!j.at("forest").is_null()) s.model = std::make_shared<ForestModel>(ForestModel::from_json(j["forest"]));
  s.validate();
  return s;
}

void AdvisingPolicySpec::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_json().dump());
}

AdvisingPolicySpec AdvisingPolicySpec::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

bool decide(const AdvisingPolicySpec& spec, const AdviceContext& ctx, Rng* random_stream) {
  if (ctx.outcome_oracle() && spec.kind != TreatmentKind::Omniscient) {
    throw ValidationError("outcome oracle passed to a non-Omniscient policy");
  }
  switch (spec.kind) {
    case TreatmentKind::NoAdvice:
      return false;
    case TreatmentKind::Update:
      return true;
    case TreatmentKind::Omniscient: {
      if (!ctx.outcome_oracle()) throw ValidationError("Omniscient policy requires the outcome oracle");
      const int y = *ctx.outcome_oracle();
      return error_tenths(y, ctx.y_hat_alg_rounded()) < error_tenths(y, ctx.y_hat_unassisted());
    }
    case TreatmentKind::Random:
      if (!random_stream) throw ValidationError("Random policy requires a random stream");
      if (ctx.y_hat_alg_rounded() == ctx.y_hat_unassisted()) return false;
      return random_stream->bernoulli(spec.advise_probability);
    case TreatmentKind::Learned:
      if (!spec.model) throw ValidationError("Learned policy without a model");
      return spec.model->classify(encode_policy_features(ctx, spec.encoding, spec.feature_options), spec.threshold);
  }
  return false;
}

}  // namespace advise
