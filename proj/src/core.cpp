#include "advise/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace advise {

namespace {
// Absorbs binary representation error of decimal inputs such as 0.15.
constexpr double kGridSlack = 1e-9;
}  // namespace

GridPrediction GridPrediction::from_tenths(int tenths) {
  if (tenths < 0 || tenths > kSteps) {
    throw ValidationError("off-grid prediction: " + std::to_string(tenths) + " tenths");
  }
  return GridPrediction(tenths);
}

GridPrediction GridPrediction::from_probability(double p) {
  if (!std::isfinite(p)) throw ValidationError("off-grid prediction: non-finite value");
  const double scaled = p * kSteps;
  const double k = std::round(scaled);
  if (std::abs(scaled - k) > kGridSlack * kSteps || k < 0 || k > kSteps) {
    std::ostringstream os;
    os << "off-grid prediction: " << p;
    throw ValidationError(os.str());
  }
  return GridPrediction(static_cast<int>(k));
}

GridPrediction round_to_grid(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    std::ostringstream os;
    os << "probability out of range [0,1]: " << p;
    throw ValidationError(os.str());
  }
  const double scaled = p * GridPrediction::kSteps;
  double k = std::floor(scaled);
  if (scaled - k >= 0.5 - kGridSlack) k += 1.0;
  return GridPrediction::from_tenths(std::min(static_cast<int>(k), GridPrediction::kSteps));
}

std::string_view to_string(Gender g) { return g == Gender::Male ? "male" : "female"; }
std::string_view to_string(Race r) { return r == Race::Black ? "black" : "white"; }

Gender parse_gender(std::string_view s) {
  if (s == "male") return Gender::Male;
  if (s == "female") return Gender::Female;
  throw ValidationError("unknown gender: '" + std::string(s) + "'");
}

Race parse_race(std::string_view s) {
  if (s == "black") return Race::Black;
  if (s == "white") return Race::White;
  throw ValidationError("unknown race: '" + std::string(s) + "'");
}

OffenseCategories::OffenseCategories()
    : names_{"violent", "property", "drug", "public-order"} {}

OffenseCategories::OffenseCategories(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ValidationError("offense category set is empty");
  auto sorted = names_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("duplicate offense category");
  }
}

std::size_t OffenseCategories::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ValidationError("unknown offense category: '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

bool OffenseCategories::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

void validate_case(const DefendantCase& c, const OffenseCategories& offenses) {
  if (c.id.empty()) throw ValidationError("case id is empty");
  if (c.age < kAdultAge) throw ValidationError("age below 18 for case " + c.id);
  if (c.prior_arrests < 0 || c.prior_convictions < 0) {
    throw ValidationError("negative prior count for case " + c.id);
  }
  if (c.prior_convictions > c.prior_arrests) {
    throw ValidationError("prior_convictions exceeds prior_arrests for case " + c.id);
  }
  if (c.outcome && *c.outcome != 0 && *c.outcome != 1) {
    throw ValidationError("outcome must be 0 or 1 for case " + c.id);
  }
  (void)offenses.index_of(c.offense_type);
}

MaskedCase MaskedCase::of(const DefendantCase& c) {
  return MaskedCase{c.age, c.offense_type, c.prior_arrests, c.prior_convictions, c.prior_fta};
}

std::string_view to_string(TreatmentKind t) {
  switch (t) {
    case TreatmentKind::Learned: return "Learned";
    case TreatmentKind::Random: return "Random";
    case TreatmentKind::Omniscient: return "Omniscient";
    case TreatmentKind::NoAdvice: return "NoAdvice";
    case TreatmentKind::Update: return "Update";
  }
  return "?";
}

TreatmentKind parse_treatment(std::string_view s) {
  for (auto t : kAllTreatments) {
    if (to_string(t) == s) return t;
  }
  throw ValidationError("unknown treatment: '" + std::string(s) + "'");
}

PredictionRecord make_record(std::string case_id, std::string participant_id, int period, int y,
                             GridPrediction unassisted, double alg, bool z_hat,
                             std::optional<GridPrediction> assisted) {
  PredictionRecord r;
  r.case_id = std::move(case_id);
  r.participant_id = std::move(participant_id);
  r.period = period;
  r.y = y;
  r.y_hat_unassisted = unassisted;
  r.y_hat_alg = alg;
  r.y_hat_alg_rounded = round_to_grid(alg);
  r.z_hat = z_hat;
  if (z_hat && !assisted) throw ValidationError("advised record without assisted prediction");
  if (!z_hat && assisted) throw ValidationError("assisted prediction on a record without advice");
  r.y_hat_assisted = assisted;
  r.y_hat_final = z_hat ? *assisted : unassisted;
  return r;
}

void validate_record(const PredictionRecord& r) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("record (" + r.participant_id + ", period " + std::to_string(r.period) +
                          "): " + what);
  };
  if (r.y != 0 && r.y != 1) fail("y must be 0 or 1");
  if (r.period < 1) fail("period must be >= 1");
  if (!(r.y_hat_alg >= 0.0 && r.y_hat_alg <= 1.0)) fail("y_hat_alg outside [0,1]");
  if (round_to_grid(r.y_hat_alg) != r.y_hat_alg_rounded) fail("y_hat_alg_rounded mismatch");
  if (r.z_hat) {
    if (!r.y_hat_assisted) fail("z_hat set but y_hat_assisted absent");
    if (r.y_hat_final != *r.y_hat_assisted) fail("final differs from assisted");
  } else {
    if (r.y_hat_assisted) fail("y_hat_assisted present without advice");
    if (r.y_hat_final != r.y_hat_unassisted) fail("final differs from unassisted");
  }
}

}  // namespace advise
