#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace advise {

/// Raised for any input that violates a documented contract (schema, range,
/// state). The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A probability restricted to {0.0, 0.1, ..., 1.0}, stored as integer tenths.
class GridPrediction {
 public:
  static constexpr int kSteps = 10;
  static constexpr int kPoints = kSteps + 1;

  constexpr GridPrediction() = default;

  static GridPrediction from_tenths(int tenths);
  /// Accepts only values within 1e-9 of a grid point.
  static GridPrediction from_probability(double p);

  [[nodiscard]] constexpr int tenths() const { return tenths_; }
  [[nodiscard]] constexpr double probability() const { return tenths_ / 10.0; }

  friend constexpr bool operator==(GridPrediction, GridPrediction) = default;
  friend constexpr auto operator<=>(GridPrediction, GridPrediction) = default;

 private:
  explicit constexpr GridPrediction(int tenths) : tenths_(tenths) {}
  int tenths_ = 0;
};

/// Nearest grid value; exact midpoints round up. Rejects p outside [0,1].
GridPrediction round_to_grid(double p);

enum class Gender : std::uint8_t { Male, Female };
enum class Race : std::uint8_t { Black, White };

std::string_view to_string(Gender g);
std::string_view to_string(Race r);
Gender parse_gender(std::string_view s);
Race parse_race(std::string_view s);

/// Offense-type vocabulary; configurable at ingestion.
class OffenseCategories {
 public:
  OffenseCategories();  // violent, property, drug, public-order
  explicit OffenseCategories(std::vector<std::string> names);

  [[nodiscard]] std::size_t size() const { return names_.size(); }
  [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
  /// Throws ValidationError naming the category when unknown.
  [[nodiscard]] std::size_t index_of(std::string_view name) const;
  [[nodiscard]] bool contains(std::string_view name) const;

  friend bool operator==(const OffenseCategories&, const OffenseCategories&) = default;

 private:
  std::vector<std::string> names_;
};

struct DefendantCase {
  std::string id;
  int age = 18;
  Gender gender = Gender::Male;
  Race race = Race::White;
  std::string offense_type;
  int prior_arrests = 0;
  int prior_convictions = 0;
  bool prior_fta = false;
  std::optional<int> outcome;  // 1 = violated release terms

  friend bool operator==(const DefendantCase&, const DefendantCase&) = default;
};

inline constexpr int kAdultAge = 18;

/// Throws ValidationError on age < 18, convictions > arrests, negative counts,
/// outcome outside {0,1}, or an unknown offense category.
void validate_case(const DefendantCase& c, const OffenseCategories& offenses);

/// The feature-bearing part of a case with race and gender removed. Model
/// and policy feature encoders only accept this view.
struct MaskedCase {
  int age = 18;
  std::string offense_type;
  int prior_arrests = 0;
  int prior_convictions = 0;
  bool prior_fta = false;

  static MaskedCase of(const DefendantCase& c);
};

enum class TreatmentKind : std::uint8_t { Learned, Random, Omniscient, NoAdvice, Update };

inline constexpr std::array<TreatmentKind, 5> kAllTreatments = {
    TreatmentKind::Learned, TreatmentKind::Random, TreatmentKind::Omniscient,
    TreatmentKind::NoAdvice, TreatmentKind::Update};

std::string_view to_string(TreatmentKind t);
/// Accepts the canonical names; throws ValidationError otherwise.
TreatmentKind parse_treatment(std::string_view s);

/// One human/algorithm interaction for a single case.
struct PredictionRecord {
  std::string case_id;
  std::string participant_id;
  int period = 1;
  int y = 0;
  GridPrediction y_hat_unassisted;
  double y_hat_alg = 0.0;
  GridPrediction y_hat_alg_rounded;
  bool z_hat = false;
  std::optional<GridPrediction> y_hat_assisted;
  GridPrediction y_hat_final;

  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// Builds a record with the final prediction derived from the advise decision.
PredictionRecord make_record(std::string case_id, std::string participant_id, int period, int y,
                             GridPrediction unassisted, double alg, bool z_hat,
                             std::optional<GridPrediction> assisted);

/// Throws ValidationError describing the first violated record invariant.
void validate_record(const PredictionRecord& r);

/// |y - p| in tenths, exact.
inline int error_tenths(int y, GridPrediction p) {
  int d = y * GridPrediction::kSteps - p.tenths();
  return d < 0 ? -d : d;
}

}  // namespace advise
