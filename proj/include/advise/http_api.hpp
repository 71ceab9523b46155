#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "advise/service.hpp"

namespace advise {

/// Server configuration file. Relative paths resolve against the file's
/// directory. ADVISE_PORT and ADVISE_DATA_DIR override port and data_dir.
struct ServerSettings {
  std::filesystem::path cases;       // pool with outcomes (cases CSV)
  std::filesystem::path risk_model;  // advise-risk-model JSON
  std::filesystem::path policy;      // learned advise-policy JSON
  double random_advise_probability = kDefaultRandomAdviseProbability;
  BonusConfig bonus;
  std::uint64_t seed = 1;
  std::filesystem::path data_dir = "advise-data";
  std::string host = "127.0.0.1";
  int port = 8080;
};

ServerSettings server_settings_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
/// Reads the file and applies the environment overrides.
ServerSettings load_server_settings(const std::filesystem::path& path);
ServiceConfig make_service_config(const ServerSettings& s);

/// HTTP/JSON front end for a SessionService.
class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();

  /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace advise
