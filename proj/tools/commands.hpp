#pragma once

// Subcommands of the sievelab experiment runner. Each command takes the
// parsed JSON config and returns the CSV files it would write, so the
// runner and the tests share one code path.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace sievelab::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kAuditFailure = 3,
  kToleranceFailure = 4,
};

/// Bad or missing config field; `what()` names the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

struct CommandResult {
  int exit_code = kOk;
  /// File name -> CSV content.
  std::map<std::string, std::string> files;
};

/// Parses JSON text, reporting the line and column of syntax errors.
nlohmann::json parse_config_text(const std::string& text);
nlohmann::json load_config_file(const std::string& path);

/// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& resolved);

CommandResult cmd_posterior(const nlohmann::json& config, const GlobalOptions& opts);
CommandResult cmd_risk_sweep(const nlohmann::json& config, const GlobalOptions& opts);
CommandResult cmd_rate_fit(const std::string& csv_text, const std::string& column, const std::string& abscissa,
                           bool check);
CommandResult cmd_penalty_curve(const nlohmann::json& config, const GlobalOptions& opts);
CommandResult cmd_audit(const nlohmann::json& config, const GlobalOptions& opts);

}  // namespace sievelab::cli
