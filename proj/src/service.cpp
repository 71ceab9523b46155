#include "advise/service.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <algorithm>

#include "advise/dataset.hpp"
#include "advise/metrics.hpp"

namespace advise {

using nlohmann::json;

void BonusConfig::validate() const {
  if (!(base_payment >= 0.0) || !(max_bonus >= 0.0)) throw ValidationError("bonus amounts must be >= 0");
  if (series_length < 1) throw ValidationError("series_length must be >= 1");
}

BonusResult compute_bonus(std::span<const PredictionRecord> records, const BonusConfig& cfg) {
  cfg.validate();
  std::vector<double> q;
  q.reserve(records.size());
  for (const auto& r : records) q.push_back(quadratic_score(r.y, r.y_hat_final.probability()));
  BonusResult out;
  out.n_records = records.size();
  out.quadratic_sum = canonical_sum(std::move(q));
  out.bonus = cfg.max_bonus * out.quadratic_sum / cfg.series_length;
  out.total = cfg.base_payment + out.bonus;
  return out;
}

namespace {

std::string times(int n) { return std::to_string(n) + (n == 1 ? " time" : " times"); }

std::string percent(GridPrediction v) { return std::to_string(v.tenths() * 10) + "%"; }

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ServiceError not_found(const std::string& id) {
  return ServiceError(ServiceError::Kind::NotFound, "unknown session: " + id);
}

ServiceError conflict(const std::string& msg) { return ServiceError(ServiceError::Kind::Conflict, msg); }

GridPrediction grid_from_tenths(int tenths) {
  if (tenths < 0 || tenths > GridPrediction::kSteps) {
    throw ServiceError(ServiceError::Kind::Invalid,
                       "prediction_tenths must be an integer in [0,10], got " + std::to_string(tenths));
  }
  return GridPrediction::from_tenths(tenths);
}

}  // namespace

std::string render_vignette(const DefendantCase& c, int number) {
  const bool male = c.gender == Gender::Male;
  const std::string he = male ? "He" : "She";
  std::ostringstream os;
  os << "Defendant #" << number << " is a " << c.age << " year old " << to_string(c.race) << ' '
     << (male ? "male" : "female") << ". ";
  const char first = c.offense_type.empty() ? 'x' : c.offense_type.front();
  const bool vowel = std::string_view("aeiou").find(first) != std::string_view::npos;
  os << he << " was arrested for " << (vowel ? "an " : "a ") << c.offense_type << " crime. ";
  if (c.prior_arrests == 0) {
    os << "The defendant has never previously been arrested. ";
  } else {
    os << "The defendant has previously been arrested " << times(c.prior_arrests) << ". ";
  }
  if (c.prior_fta) {
    os << "The defendant has previously been released before trial, and has previously failed to appear. ";
  } else {
    os << "The defendant has previously been released before trial, and has never failed to appear. ";
  }
  if (c.prior_convictions == 0) {
    os << he << " has never previously been convicted.";
  } else {
    os << he << " has previously been convicted " << times(c.prior_convictions) << '.';
  }
  return os.str();
}

std::string advice_message(TreatmentKind kind, GridPrediction value) {
  switch (kind) {
    case TreatmentKind::Learned:
    case TreatmentKind::Omniscient:
      return "Your algorithmic assistant identifies that your current prediction is likely to have high error, "
             "and advises you to improve the prediction to " +
             percent(value) + ".";
    case TreatmentKind::Random:
    case TreatmentKind::Update:
      return "Your algorithmic assistant predicts that this person is " + percent(value) +
             " likely to fail to appear in court for trial or get arrested before trial.";
    case TreatmentKind::NoAdvice:
      break;
  }
  throw ValidationError("NoAdvice sessions never show advice");
}

std::string_view to_string(SessionPhase p) {
  switch (p) {
    case SessionPhase::AwaitingInitial: return "awaiting_initial";
    case SessionPhase::AwaitingFinal: return "awaiting_final";
    case SessionPhase::Done: return "done";
  }
  return "?";
}

std::string_view ServiceError::code() const {
  switch (kind_) {
    case Kind::NotFound: return "not_found";
    case Kind::Conflict: return "phase_error";
    case Kind::Invalid: return "invalid_request";
  }
  return "error";
}

void ServiceConfig::validate() const {
  if (!pool || pool->empty()) throw ValidationError("service needs a non-empty case pool");
  for (const auto& c : *pool) {
    if (!c.outcome) throw ValidationError("pool case without outcome: " + c.id);
  }
  if (!algorithm) throw ValidationError("service needs an algorithm");
  if (!learned_policy) throw ValidationError("service needs a learned policy");
  if (learned_policy->kind != TreatmentKind::Learned) throw ValidationError("learned_policy has the wrong kind");
  learned_policy->validate();
  if (!(random_advise_probability >= 0.0 && random_advise_probability <= 1.0)) {
    throw ValidationError("random_advise_probability must lie in [0,1]");
  }
  bonus.validate();
  if (static_cast<std::size_t>(bonus.series_length) > pool->size()) {
    throw ValidationError("series_length exceeds the case pool size");
  }
}

struct SessionService::Session {
  std::string id;
  TreatmentKind treatment;
  std::vector<std::size_t> series;
  std::string created_at;
  std::size_t cursor = 0;
  SessionPhase phase = SessionPhase::AwaitingInitial;
  GridPrediction pending_initial;
  double pending_alg = 0.0;
  std::vector<PredictionRecord> records;
  std::mutex mutex;
};

SessionService::SessionService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  policies_[TreatmentKind::Learned] = *cfg_.learned_policy;
  policies_[TreatmentKind::Random] = AdvisingPolicySpec::random(cfg_.random_advise_probability, cfg_.seed);
  policies_[TreatmentKind::Omniscient] = AdvisingPolicySpec::simple(TreatmentKind::Omniscient);
  policies_[TreatmentKind::NoAdvice] = AdvisingPolicySpec::simple(TreatmentKind::NoAdvice);
  policies_[TreatmentKind::Update] = AdvisingPolicySpec::simple(TreatmentKind::Update);
  if (!cfg_.data_dir.empty()) {
    std::filesystem::create_directories(cfg_.data_dir / "sessions");
    replay();
  }
}

SessionService::~SessionService() = default;

std::filesystem::path SessionService::session_log(const std::string& id) const {
  return cfg_.data_dir / "sessions" / (id + ".jsonl");
}

void SessionService::persist_line(const std::filesystem::path& file, const json& line) const {
  if (cfg_.data_dir.empty()) return;
  std::ofstream out(file, std::ios::app | std::ios::binary);
  out << line.dump() << '\n';
  out.flush();
  if (!out) throw std::runtime_error("cannot append to " + file.string());
}

std::shared_ptr<SessionService::Session> SessionService::build_session(const std::string& id, TreatmentKind kind,
                                                                       std::vector<std::size_t> series,
                                                                       std::string created_at) const {
  auto s = std::make_shared<Session>();
  s->id = id;
  s->treatment = kind;
  s->series = std::move(series);
  s->created_at = std::move(created_at);
  return s;
}

json SessionService::create_session(std::optional<TreatmentKind> treatment) {
  std::unique_lock lock(store_mutex_);
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(next_number_));
  const std::string id = buf;
  const RngSeed root(cfg_.seed);
  TreatmentKind kind;
  if (treatment) {
    kind = *treatment;
  } else {
    Rng coin{root.derive("session/treatment").derive(id)};
    kind = kAllTreatments[coin.below(kAllTreatments.size())];
  }
  const auto& pool = *cfg_.pool;
  Rng series_rng{root.derive("session/series").derive(id)};
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  const auto L = static_cast<std::size_t>(cfg_.bonus.series_length);
  for (std::size_t k = 0; k < L; ++k) std::swap(order[k], order[k + series_rng.below(order.size() - k)]);
  order.resize(L);

  auto s = build_session(id, kind, order, now_utc());
  if (!cfg_.data_dir.empty()) {
    json series_ids = json::array();
    for (auto i : s->series) series_ids.push_back(pool[i].id);
    persist_line(session_log(id), {{"type", "created"},
                                   {"session_id", id},
                                   {"treatment", to_string(kind)},
                                   {"series", series_ids},
                                   {"created_at", s->created_at}});
    persist_line(cfg_.data_dir / "index.jsonl",
                 {{"session_id", id}, {"treatment", to_string(kind)}, {"created_at", s->created_at}});
  }
  sessions_[id] = s;
  order_.push_back(id);
  ++next_number_;
  return {{"session_id", id}, {"treatment", to_string(kind)}, {"series_length", cfg_.bonus.series_length}};
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& session_id) const {
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw not_found(session_id);
  return it->second;
}

json SessionService::next_case(const std::string& session_id) {
  std::shared_lock store(store_mutex_);
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  if (s->phase == SessionPhase::Done) throw conflict("session complete");
  if (s->phase != SessionPhase::AwaitingInitial) throw conflict("awaiting final prediction");
  const auto& c = (*cfg_.pool)[s->series[s->cursor]];
  const int period = static_cast<int>(s->cursor + 1);
  return {{"session_id", s->id},
          {"period", period},
          {"total", s->series.size()},
          {"case_id", c.id},
          {"vignette", render_vignette(c, period)},
          {"case",
           {{"age", c.age},
            {"gender", to_string(c.gender)},
            {"race", to_string(c.race)},
            {"offense_type", c.offense_type},
            {"prior_arrests", c.prior_arrests},
            {"prior_convictions", c.prior_convictions},
            {"prior_fta", c.prior_fta}}}};
}

bool SessionService::decide_advice(const Session& s, std::size_t period_index, double alg,
                                   GridPrediction initial) const {
  const auto& c = (*cfg_.pool)[s.series[period_index]];
  const int period = static_cast<int>(period_index + 1);
  AdviceContext ctx(c, alg, initial, period, s.id);
  if (s.treatment == TreatmentKind::Omniscient) ctx = ctx.with_oracle(*c.outcome);
  Rng coin{RngSeed(cfg_.seed).derive("session/random").derive(s.id).derive("period", period_index + 1)};
  return decide(policies_.at(s.treatment), ctx, &coin);
}

json SessionService::apply_initial(Session& s, int prediction_tenths, bool persist) {
  if (s.phase == SessionPhase::Done) throw conflict("session complete");
  if (s.phase != SessionPhase::AwaitingInitial) throw conflict("initial prediction already submitted for this period");
  const GridPrediction initial = grid_from_tenths(prediction_tenths);
  const auto& c = (*cfg_.pool)[s.series[s.cursor]];
  const double alg = cfg_.algorithm(c);
  const bool advised = decide_advice(s, s.cursor, alg, initial);
  const int period = static_cast<int>(s.cursor + 1);
  if (persist) {
    persist_line(session_log(s.id), {{"type", "initial"}, {"period", period}, {"prediction_tenths", prediction_tenths}});
  }
  json out = {{"session_id", s.id}, {"period", period}, {"advised", advised}, {"advice", nullptr}};
  if (advised) {
    s.phase = SessionPhase::AwaitingFinal;
    s.pending_initial = initial;
    s.pending_alg = alg;
    const GridPrediction shown = round_to_grid(alg);
    out["advice"] = {{"prediction_tenths", shown.tenths()}, {"message", advice_message(s.treatment, shown)}};
  } else {
    s.records.push_back(make_record(c.id, s.id, period, *c.outcome, initial, alg, false, std::nullopt));
    if (++s.cursor == s.series.size()) s.phase = SessionPhase::Done;
  }
  out["phase"] = to_string(s.phase);
  return out;
}

json SessionService::apply_final(Session& s, int prediction_tenths, bool persist) {
  if (s.phase != SessionPhase::AwaitingFinal) {
    throw conflict(s.phase == SessionPhase::Done ? "session complete" : "no advice pending for this period");
  }
  const GridPrediction assisted = grid_from_tenths(prediction_tenths);
  const auto& c = (*cfg_.pool)[s.series[s.cursor]];
  const int period = static_cast<int>(s.cursor + 1);
  if (persist) {
    persist_line(session_log(s.id), {{"type", "final"}, {"period", period}, {"prediction_tenths", prediction_tenths}});
  }
  s.records.push_back(make_record(c.id, s.id, period, *c.outcome, s.pending_initial, s.pending_alg, true, assisted));
  s.phase = ++s.cursor == s.series.size() ? SessionPhase::Done : SessionPhase::AwaitingInitial;
  return {{"recorded", true}, {"period_advanced", true}, {"period", period}, {"phase", to_string(s.phase)}};
}

json SessionService::submit_initial(const std::string& session_id, int prediction_tenths) {
  std::shared_lock store(store_mutex_);
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return apply_initial(*s, prediction_tenths, true);
}

json SessionService::submit_final(const std::string& session_id, int prediction_tenths) {
  std::shared_lock store(store_mutex_);
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return apply_final(*s, prediction_tenths, true);
}

json SessionService::summary(const std::string& session_id) {
  std::shared_lock store(store_mutex_);
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  if (s->phase != SessionPhase::Done) throw conflict("session incomplete");
  const auto b = compute_bonus(s->records, cfg_.bonus);
  return {{"session_id", s->id},
          {"treatment", to_string(s->treatment)},
          {"series_length", cfg_.bonus.series_length},
          {"n_records", b.n_records},
          {"quadratic_sum", b.quadratic_sum},
          {"mean_quadratic_score", b.quadratic_sum / static_cast<double>(b.n_records)},
          {"base_payment", cfg_.bonus.base_payment},
          {"bonus", b.bonus},
          {"total", b.total}};
}

json SessionService::state(const std::string& session_id) {
  std::shared_lock store(store_mutex_);
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  json out = {{"session_id", s->id},
              {"treatment", to_string(s->treatment)},
              {"phase", to_string(s->phase)},
              {"completed", s->records.size()},
              {"total", s->series.size()},
              {"created_at", s->created_at},
              {"advice", nullptr}};
  if (s->phase != SessionPhase::Done) out["period"] = s->cursor + 1;
  if (s->phase == SessionPhase::AwaitingFinal) {
    const GridPrediction shown = round_to_grid(s->pending_alg);
    out["initial_prediction_tenths"] = s->pending_initial.tenths();
    out["advice"] = {{"prediction_tenths", shown.tenths()}, {"message", advice_message(s->treatment, shown)}};
  }
  return out;
}

std::vector<PredictionRecord> SessionService::export_records(const ExportFilter& filter) {
  std::unique_lock store(store_mutex_);
  std::vector<PredictionRecord> out;
  for (const auto& id : order_) {
    if (filter.session_id && *filter.session_id != id) continue;
    const auto& s = *sessions_.at(id);
    if (filter.treatment && *filter.treatment != s.treatment) continue;
    if (filter.completed_only && s.phase != SessionPhase::Done) continue;
    out.insert(out.end(), s.records.begin(), s.records.end());
  }
  return out;
}

std::size_t SessionService::session_count() const {
  std::shared_lock store(store_mutex_);
  return sessions_.size();
}

void SessionService::replay() {
  const auto index_path = cfg_.data_dir / "index.jsonl";
  if (!std::filesystem::exists(index_path)) return;
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < cfg_.pool->size(); ++i) by_id.emplace((*cfg_.pool)[i].id, i);

  auto parse_lines = [](const std::filesystem::path& p) {
    std::vector<json> lines;
    std::ifstream in(p, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        lines.push_back(json::parse(line));
      } catch (const json::exception&) {
        // A torn trailing write from a crash is dropped; anything else is corruption.
        if (in.peek() == std::char_traits<char>::eof()) break;
        throw ValidationError("corrupt event log " + p.string());
      }
    }
    return lines;
  };

  for (const auto& entry : parse_lines(index_path)) {
    const std::string id = entry.at("session_id").get<std::string>();
    const auto events = parse_lines(session_log(id));
    if (events.empty() || events.front().at("type") != "created") {
      throw ValidationError("event log for " + id + " has no creation event");
    }
    const auto& created = events.front();
    std::vector<std::size_t> series;
    for (const auto& cid : created.at("series")) {
      auto it = by_id.find(cid.get<std::string>());
      if (it == by_id.end()) throw ValidationError("session " + id + " references unknown case " + cid.dump());
      series.push_back(it->second);
    }
    if (series.size() != static_cast<std::size_t>(cfg_.bonus.series_length)) {
      throw ValidationError("session " + id + " was created with a different series length");
    }
    auto s = build_session(id, parse_treatment(created.at("treatment").get<std::string>()), std::move(series),
                           created.value("created_at", ""));
    for (std::size_t k = 1; k < events.size(); ++k) {
      const auto& e = events[k];
      const int tenths = e.at("prediction_tenths").get<int>();
      if (e.at("period").get<std::size_t>() != s->cursor + 1) {
        throw ValidationError("event log for " + id + " is out of order");
      }
      if (e.at("type") == "initial") {
        apply_initial(*s, tenths, false);
      } else if (e.at("type") == "final") {
        apply_final(*s, tenths, false);
      } else {
        throw ValidationError("unknown event type in log for " + id);
      }
    }
    sessions_[id] = s;
    order_.push_back(id);
    if (id.size() > 1 && id[0] == 's') {
      next_number_ = std::max<std::uint64_t>(next_number_, std::stoull(id.substr(1)) + 1);
    }
  }
}

}  // namespace advise
