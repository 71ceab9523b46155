#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace advise {

/// Entry point of the `advise` tool. Returns 0 on success and 2 on invalid
/// flags, input, or missing files.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 16 hex digits of the FNV-1a hash of `contents`.
std::string content_hash(std::string_view contents);

/// Replaces every "{hash}" in the path with content_hash(contents).
std::filesystem::path resolve_output_path(const std::string& pattern, std::string_view contents);

/// Per-invocation record of arguments, seeds, and file hashes. Carries no
/// timestamps so reruns produce identical manifests.
class RunManifest {
 public:
  explicit RunManifest(std::string command, const std::vector<std::string>& args);

  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path, std::string_view contents);

  [[nodiscard]] nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> args_;
  nlohmann::json extra_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  nlohmann::json outputs_ = nlohmann::json::array();
};

}  // namespace advise
