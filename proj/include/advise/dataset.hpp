#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "advise/core.hpp"

namespace advise {

/// One unassisted human prediction on a case.
struct HumanPrediction {
  std::string case_id;
  std::string participant_id;
  GridPrediction value;

  friend bool operator==(const HumanPrediction&, const HumanPrediction&) = default;
};

inline constexpr std::string_view kSyntheticParticipantPrefix = "synth:";
bool is_synthetic_participant(std::string_view participant_id);

struct PredictionDataset {
  std::vector<DefendantCase> cases;
  std::vector<HumanPrediction> predictions;
  OffenseCategories offenses;

  /// Case id -> position in `cases`.
  [[nodiscard]] std::unordered_map<std::string, std::size_t> case_index() const;
  /// Throws ValidationError on duplicate ids, invalid cases, or predictions
  /// referencing unknown cases (with the prediction's row index).
  void validate() const;
};

enum class DatasetFormat { CasesCsv, PredictionsCsv, RecordsJsonl };

/// Parsing errors carry the 1-based data row number (header excluded).
std::vector<DefendantCase> read_cases_csv(std::istream& in, const OffenseCategories& offenses = {});
std::vector<HumanPrediction> read_predictions_csv(std::istream& in);
std::vector<PredictionRecord> read_records_jsonl(std::istream& in);

void write_cases_csv(std::ostream& out, const std::vector<DefendantCase>& cases);
void write_predictions_csv(std::ostream& out, const std::vector<HumanPrediction>& predictions);
void write_records_jsonl(std::ostream& out, const std::vector<PredictionRecord>& records);
std::string record_to_json_line(const PredictionRecord& r);
PredictionRecord record_from_json_line(std::string_view line);

std::vector<DefendantCase> load_cases(const std::filesystem::path& path,
                                      const OffenseCategories& offenses = {});
std::vector<HumanPrediction> load_predictions(const std::filesystem::path& path);
std::vector<PredictionRecord> load_records(const std::filesystem::path& path);

/// Loads a file of the given format into a dataset. Predictions are checked
/// against `cases` when provided; records-jsonl yields predictions only.
PredictionDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                               const std::vector<DefendantCase>& cases = {},
                               const OffenseCategories& offenses = {});

/// Cases + predictions in one call, validated together.
PredictionDataset load_dataset(const std::filesystem::path& cases_csv,
                               const std::filesystem::path& predictions_csv,
                               const OffenseCategories& offenses = {});

/// Writes via a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace advise
