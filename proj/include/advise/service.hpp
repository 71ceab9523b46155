#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "advise/core.hpp"
#include "advise/policy.hpp"

namespace advise {

struct BonusConfig {
  double base_payment = 2.00;
  double max_bonus = 3.00;
  int series_length = 50;

  void validate() const;
};

struct BonusResult {
  std::size_t n_records = 0;
  double quadratic_sum = 0.0;
  double bonus = 0.0;
  double total = 0.0;
};

/// bonus = max_bonus * sum(quadratic score) / series_length; total = base + bonus.
BonusResult compute_bonus(std::span<const PredictionRecord> records, const BonusConfig& cfg);

/// Text shown to the participant for period `number`. Race and gender are
/// part of the text; only the models are blind to them.
std::string render_vignette(const DefendantCase& c, int number);

/// Learned and Omniscient speak of high error; Random and Update state the risk.
std::string advice_message(TreatmentKind kind, GridPrediction value);

enum class SessionPhase { AwaitingInitial, AwaitingFinal, Done };
std::string_view to_string(SessionPhase p);

/// Carries the HTTP-facing category alongside the message.
class ServiceError : public ValidationError {
 public:
  enum class Kind { NotFound, Conflict, Invalid };
  ServiceError(Kind kind, const std::string& message) : ValidationError(message), kind_(kind) {}
  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] std::string_view code() const;

 private:
  Kind kind_;
};

struct ServiceConfig {
  std::shared_ptr<const std::vector<DefendantCase>> pool;
  std::function<double(const DefendantCase&)> algorithm;
  /// Learned policy; the remaining kinds are built from the fields below.
  std::optional<AdvisingPolicySpec> learned_policy;
  double random_advise_probability = kDefaultRandomAdviseProbability;
  BonusConfig bonus;
  std::uint64_t seed = 1;
  /// Event logs live under data_dir/sessions; empty keeps everything in memory.
  std::filesystem::path data_dir;

  void validate() const;
};

struct ExportFilter {
  std::optional<TreatmentKind> treatment;
  std::optional<std::string> session_id;
  bool completed_only = false;
};

/// Sessions of the live protocol: next -> initial -> [advice -> final] for
/// each period. Each write is appended to the session's event log before it
/// takes effect in memory, and a restart replays the logs.
class SessionService {
 public:
  explicit SessionService(ServiceConfig cfg);
  ~SessionService();

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  nlohmann::json create_session(std::optional<TreatmentKind> treatment = std::nullopt);
  nlohmann::json next_case(const std::string& session_id);
  nlohmann::json submit_initial(const std::string& session_id, int prediction_tenths);
  nlohmann::json submit_final(const std::string& session_id, int prediction_tenths);
  nlohmann::json summary(const std::string& session_id);
  /// Phase, progress, and pending advice, for clients resuming a session.
  nlohmann::json state(const std::string& session_id);

  std::vector<PredictionRecord> export_records(const ExportFilter& filter = {});

  [[nodiscard]] std::size_t session_count() const;
  [[nodiscard]] const ServiceConfig& config() const { return cfg_; }

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& session_id) const;
  std::shared_ptr<Session> build_session(const std::string& id, TreatmentKind kind,
                                         std::vector<std::size_t> series, std::string created_at) const;
  nlohmann::json apply_initial(Session& s, int prediction_tenths, bool persist);
  nlohmann::json apply_final(Session& s, int prediction_tenths, bool persist);
  void persist_line(const std::filesystem::path& file, const nlohmann::json& line) const;
  [[nodiscard]] std::filesystem::path session_log(const std::string& id) const;
  void replay();
  bool decide_advice(const Session& s, std::size_t period_index, double alg, GridPrediction initial) const;

  ServiceConfig cfg_;
  std::map<TreatmentKind, AdvisingPolicySpec> policies_;
  mutable std::shared_mutex store_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::vector<std::string> order_;  // creation order
  std::uint64_t next_number_ = 1;
};

}  // namespace advise
