#include "advise/http_api.hpp"

#include <cstdlib>
#include <sstream>

#include <httplib.h>

#include "advise/dataset.hpp"
#include "advise/risk_model.hpp"

namespace advise {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", {{"code", code}, {"message", message}}}});
}

int status_of(const ServiceError& e) {
  switch (e.kind()) {
    case ServiceError::Kind::NotFound: return 404;
    case ServiceError::Kind::Conflict: return 409;
    case ServiceError::Kind::Invalid: return 400;
  }
  return 400;
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    send_error(res, status_of(e), e.code(), e.what());
  } catch (const ValidationError& e) {
    send_error(res, 400, "invalid_request", e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "invalid_request", std::string("malformed JSON: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

json parse_body(const httplib::Request& req, bool allow_empty) {
  if (req.body.empty()) {
    if (allow_empty) return json::object();
    throw ValidationError("request body must be a JSON object");
  }
  json j = json::parse(req.body);
  if (!j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

int prediction_of(const json& body) {
  auto it = body.find("prediction_tenths");
  if (it == body.end() || !it->is_number_integer()) {
    throw ValidationError("prediction_tenths must be an integer in [0,10]");
  }
  const auto v = it->get<std::int64_t>();
  if (v < 0 || v > GridPrediction::kSteps) throw ValidationError("prediction_tenths must be an integer in [0,10]");
  return static_cast<int>(v);
}

}  // namespace

ServerSettings server_settings_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("server config must be a JSON object");
  static const std::vector<std::string> known = {
      "cases", "risk_model", "policy", "random_advise_probability", "series_length", "base_payment",
      "max_bonus", "seed", "data_dir", "host", "port"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ValidationError("unknown server config key: " + k);
    }
  }
  ServerSettings s;
  try {
    s.cases = resolve(base_dir, j.at("cases").get<std::string>());
    s.risk_model = resolve(base_dir, j.at("risk_model").get<std::string>());
    s.policy = resolve(base_dir, j.at("policy").get<std::string>());
    s.random_advise_probability = j.value("random_advise_probability", s.random_advise_probability);
    s.bonus.series_length = j.value("series_length", s.bonus.series_length);
    s.bonus.base_payment = j.value("base_payment", s.bonus.base_payment);
    s.bonus.max_bonus = j.value("max_bonus", s.bonus.max_bonus);
    s.seed = j.value("seed", s.seed);
    if (j.contains("data_dir")) s.data_dir = resolve(base_dir, j.at("data_dir").get<std::string>());
    s.host = j.value("host", s.host);
    s.port = j.value("port", s.port);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("server config: ") + e.what());
  }
  s.bonus.validate();
  return s;
}

ServerSettings load_server_settings(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("cannot parse " + path.string() + ": " + e.what());
  }
  ServerSettings s = server_settings_from_json(j, path.parent_path());
  if (const char* port = std::getenv("ADVISE_PORT")) {
    try {
      s.port = std::stoi(port);
    } catch (const std::exception&) {
      throw ValidationError(std::string("ADVISE_PORT is not a number: ") + port);
    }
  }
  if (const char* dir = std::getenv("ADVISE_DATA_DIR")) s.data_dir = dir;
  return s;
}

ServiceConfig make_service_config(const ServerSettings& s) {
  auto risk = std::make_shared<RiskModel>(RiskModel::load(s.risk_model));
  auto policy = AdvisingPolicySpec::load(s.policy);
  if (policy.kind != TreatmentKind::Learned) throw ValidationError("server policy file must hold a Learned policy");
  ServiceConfig cfg;
  cfg.pool = std::make_shared<const std::vector<DefendantCase>>(load_cases(s.cases, risk->encoding().offenses()));
  cfg.algorithm = [risk](const DefendantCase& c) { return risk->predict(c); };
  cfg.learned_policy = std::move(policy);
  cfg.random_advise_probability = s.random_advise_probability;
  cfg.bonus = s.bonus;
  cfg.seed = s.seed;
  cfg.data_dir = s.data_dir;
  return cfg;
}

struct HttpServer::Impl {
  SessionService& service;
  httplib::Server server;

  explicit Impl(SessionService& svc) : service(svc) { routes(); }

  void routes() {
    server.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = parse_body(req, true);
        std::optional<TreatmentKind> kind;
        if (body.contains("treatment") && !body.at("treatment").is_null()) {
          if (!body.at("treatment").is_string()) throw ValidationError("treatment must be a string");
          kind = parse_treatment(body.at("treatment").get<std::string>());
        }
        send_json(res, 201, service.create_session(kind));
      });
    });
    server.Get(R"(/v1/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, service.state(req.matches[1])); });
    });
    server.Get(R"(/v1/sessions/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, service.next_case(req.matches[1])); });
    });
    server.Post(R"(/v1/sessions/([^/]+)/initial)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const int v = prediction_of(parse_body(req, false));
        send_json(res, 200, service.submit_initial(req.matches[1], v));
      });
    });
    server.Post(R"(/v1/sessions/([^/]+)/final)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const int v = prediction_of(parse_body(req, false));
        send_json(res, 200, service.submit_final(req.matches[1], v));
      });
    });
    server.Get(R"(/v1/sessions/([^/]+)/summary)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, service.summary(req.matches[1])); });
    });
    server.Get("/v1/export", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        ExportFilter f;
        if (req.has_param("treatment")) f.treatment = parse_treatment(req.get_param_value("treatment"));
        if (req.has_param("session_id")) f.session_id = req.get_param_value("session_id");
        if (req.has_param("completed")) {
          const auto v = req.get_param_value("completed");
          if (v != "true" && v != "false") throw ValidationError("completed must be true or false");
          f.completed_only = v == "true";
        }
        std::ostringstream os;
        write_records_jsonl(os, service.export_records(f));
        res.status = 200;
        res.set_content(os.str(), "application/x-ndjson");
      });
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        send_error(res, res.status, res.status == 404 ? "not_found" : "error", "no such endpoint");
      }
    });
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
  }
};

HttpServer::HttpServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }
void HttpServer::stop() { impl_->server.stop(); }
void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace advise
