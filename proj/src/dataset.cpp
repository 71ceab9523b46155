#include "advise/dataset.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace advise {

namespace {

using json = nlohmann::json;

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    auto field = line.substr(start, pos == std::string_view::npos ? line.size() - start : pos - start);
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.remove_suffix(1);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    out.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

class CsvTable {
 public:
  CsvTable(std::istream& in, std::initializer_list<std::string_view> required) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty CSV: missing header");
    auto header = split_csv_line(line);
    for (std::size_t i = 0; i < header.size(); ++i) columns_[header[i]] = i;
    for (auto name : required) {
      if (!columns_.count(std::string(name))) {
        throw ValidationError("missing column '" + std::string(name) + "'");
      }
    }
    std::size_t row = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      ++row;
      auto fields = split_csv_line(line);
      if (fields.size() != header.size()) {
        throw ValidationError("row " + std::to_string(row) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
      }
      rows_.push_back(std::move(fields));
    }
  }

  [[nodiscard]] std::size_t size() const { return rows_.size(); }
  [[nodiscard]] const std::string& at(std::size_t row, std::string_view column) const {
    return rows_[row][columns_.at(std::string(column))];
  }

 private:
  std::map<std::string, std::size_t> columns_;
  std::vector<std::vector<std::string>> rows_;
};

[[noreturn]] void row_error(std::size_t row, const std::string& what) {
  throw ValidationError("row " + std::to_string(row + 1) + ": " + what);
}

int parse_int(std::size_t row, std::string_view column, const std::string& s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    row_error(row, "column '" + std::string(column) + "' is not an integer: '" + s + "'");
  }
  return v;
}

bool parse_bool(std::size_t row, std::string_view column, const std::string& s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  row_error(row, "column '" + std::string(column) + "' is not a boolean: '" + s + "'");
}

GridPrediction grid_from_json(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_number()) {
    throw ValidationError(std::string("record field '") + field + "' missing or not a number");
  }
  return GridPrediction::from_probability(j[field].get<double>());
}

}  // namespace

bool is_synthetic_participant(std::string_view participant_id) {
  return participant_id.starts_with(kSyntheticParticipantPrefix);
}

std::unordered_map<std::string, std::size_t> PredictionDataset::case_index() const {
  std::unordered_map<std::string, std::size_t> idx;
  idx.reserve(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) idx.emplace(cases[i].id, i);
  return idx;
}

void PredictionDataset::validate() const {
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    validate_case(cases[i], offenses);
    if (!idx.emplace(cases[i].id, i).second) {
      throw ValidationError("duplicate case id '" + cases[i].id + "'");
    }
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!idx.count(predictions[i].case_id)) {
      row_error(i, "prediction references unknown case_id '" + predictions[i].case_id + "'");
    }
  }
}

std::vector<DefendantCase> read_cases_csv(std::istream& in, const OffenseCategories& offenses) {
  CsvTable t(in, {"id", "age", "gender", "race", "offense_type", "prior_arrests", "prior_convictions",
                  "prior_fta", "outcome"});
  std::vector<DefendantCase> cases;
  cases.reserve(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    DefendantCase c;
    try {
      c.id = t.at(r, "id");
      c.age = parse_int(r, "age", t.at(r, "age"));
      c.gender = parse_gender(t.at(r, "gender"));
      c.race = parse_race(t.at(r, "race"));
      c.offense_type = t.at(r, "offense_type");
      c.prior_arrests = parse_int(r, "prior_arrests", t.at(r, "prior_arrests"));
      c.prior_convictions = parse_int(r, "prior_convictions", t.at(r, "prior_convictions"));
      c.prior_fta = parse_bool(r, "prior_fta", t.at(r, "prior_fta"));
      const auto& outcome = t.at(r, "outcome");
      if (!outcome.empty()) c.outcome = parse_int(r, "outcome", outcome);
      validate_case(c, offenses);
    } catch (const ValidationError& e) {
      std::string msg = e.what();
      if (msg.starts_with("row ")) throw;
      row_error(r, msg);
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

std::vector<HumanPrediction> read_predictions_csv(std::istream& in) {
  CsvTable t(in, {"case_id", "participant_id", "prediction_tenths"});
  std::vector<HumanPrediction> out;
  out.reserve(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    const auto& raw = t.at(r, "prediction_tenths");
    int tenths = 0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), tenths);
    if (ec != std::errc() || ptr != raw.data() + raw.size()) {
      double v = 0.0;
      auto [dptr, dec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (dec == std::errc() && dptr == raw.data() + raw.size()) {
        row_error(r, "off-grid prediction: '" + raw + "' is not an integer number of tenths");
      }
      row_error(r, "column 'prediction_tenths' is not an integer: '" + raw + "'");
    }
    if (tenths < 0 || tenths > GridPrediction::kSteps) {
      row_error(r, "off-grid prediction: " + std::to_string(tenths) + " tenths");
    }
    out.push_back({t.at(r, "case_id"), t.at(r, "participant_id"), GridPrediction::from_tenths(tenths)});
  }
  return out;
}

std::string record_to_json_line(const PredictionRecord& r) {
  json j;
  j["case_id"] = r.case_id;
  j["participant_id"] = r.participant_id;
  j["period"] = r.period;
  j["y"] = r.y;
  j["y_hat_unassisted"] = r.y_hat_unassisted.probability();
  j["y_hat_alg"] = r.y_hat_alg;
  j["y_hat_alg_rounded"] = r.y_hat_alg_rounded.probability();
  j["z_hat"] = r.z_hat;
  j["y_hat_assisted"] = r.y_hat_assisted ? json(r.y_hat_assisted->probability()) : json(nullptr);
  j["y_hat_final"] = r.y_hat_final.probability();
  return j.dump();
}

PredictionRecord record_from_json_line(std::string_view line) {
  json j = json::parse(line);
  PredictionRecord r;
  r.case_id = j.at("case_id").get<std::string>();
  r.participant_id = j.at("participant_id").get<std::string>();
  r.period = j.at("period").get<int>();
  r.y = j.at("y").get<int>();
  r.y_hat_unassisted = grid_from_json(j, "y_hat_unassisted");
  r.y_hat_alg = j.at("y_hat_alg").get<double>();
  r.y_hat_alg_rounded = grid_from_json(j, "y_hat_alg_rounded");
  r.z_hat = j.at("z_hat").get<bool>();
  if (j.contains("y_hat_assisted") && !j["y_hat_assisted"].is_null()) {
    r.y_hat_assisted = grid_from_json(j, "y_hat_assisted");
  }
  r.y_hat_final = grid_from_json(j, "y_hat_final");
  validate_record(r);
  return r;
}

std::vector<PredictionRecord> read_records_jsonl(std::istream& in) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json_line(line));
    } catch (const std::exception& e) {
      row_error(row, e.what());
    }
    ++row;
  }
  return out;
}

void write_cases_csv(std::ostream& out, const std::vector<DefendantCase>& cases) {
  out << "id,age,gender,race,offense_type,prior_arrests,prior_convictions,prior_fta,outcome\n";
  for (const auto& c : cases) {
    out << c.id << ',' << c.age << ',' << to_string(c.gender) << ',' << to_string(c.race) << ','
        << c.offense_type << ',' << c.prior_arrests << ',' << c.prior_convictions << ','
        << (c.prior_fta ? 1 : 0) << ',';
    if (c.outcome) out << *c.outcome;
    out << '\n';
  }
}

void write_predictions_csv(std::ostream& out, const std::vector<HumanPrediction>& predictions) {
  out << "case_id,participant_id,prediction_tenths\n";
  for (const auto& p : predictions) {
    out << p.case_id << ',' << p.participant_id << ',' << p.value.tenths() << '\n';
  }
}

void write_records_jsonl(std::ostream& out, const std::vector<PredictionRecord>& records) {
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write file: " + path.string());
    out << contents;
    if (!out) throw ValidationError("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {
template <typename F>
auto with_input(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  try {
    return f(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}
}  // namespace

std::vector<DefendantCase> load_cases(const std::filesystem::path& path, const OffenseCategories& offenses) {
  return with_input(path, [&](std::istream& in) { return read_cases_csv(in, offenses); });
}

std::vector<HumanPrediction> load_predictions(const std::filesystem::path& path) {
  return with_input(path, [&](std::istream& in) { return read_predictions_csv(in); });
}

std::vector<PredictionRecord> load_records(const std::filesystem::path& path) {
  return with_input(path, [&](std::istream& in) { return read_records_jsonl(in); });
}

PredictionDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                               const std::vector<DefendantCase>& cases,
                               const OffenseCategories& offenses) {
  PredictionDataset ds;
  ds.offenses = offenses;
  switch (format) {
    case DatasetFormat::CasesCsv:
      ds.cases = load_cases(path, offenses);
      break;
    case DatasetFormat::PredictionsCsv:
      ds.cases = cases;
      ds.predictions = load_predictions(path);
      break;
    case DatasetFormat::RecordsJsonl:
      ds.cases = cases;
      for (const auto& r : load_records(path)) {
        ds.predictions.push_back({r.case_id, r.participant_id, r.y_hat_unassisted});
      }
      break;
  }
  if (format == DatasetFormat::CasesCsv || !cases.empty()) ds.validate();
  return ds;
}

PredictionDataset load_dataset(const std::filesystem::path& cases_csv,
                               const std::filesystem::path& predictions_csv,
                               const OffenseCategories& offenses) {
  PredictionDataset ds;
  ds.offenses = offenses;
  ds.cases = load_cases(cases_csv, offenses);
  ds.predictions = load_predictions(predictions_csv);
  try {
    ds.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(predictions_csv.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace advise
