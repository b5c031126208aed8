#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mkvlevy::cli {

enum ExitCode : int { kPass = 0, kFail = 1, kInconclusive = 2, kConfigError = 3 };

/// JSON pointer -> 1-based line where that value starts in the source text.
class SourceMap {
 public:
  static SourceMap scan(const std::string& text);
  /// Line of the pointer, or of its nearest recorded ancestor; 0 when unknown.
  int line_of(const std::string& pointer) const;

 private:
  std::map<std::string, int> lines_;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& origin, int line, const std::string& pointer, const std::string& message);
  int line() const noexcept { return line_; }
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  int line_;
  std::string pointer_;
};

struct ExperimentConfig {
  std::string kind;
  std::uint64_t seed = 0;
  nlohmann::json parameters;
  nlohmann::json document;  ///< effective config (seed override applied)
  std::string origin = "<inline>";
  SourceMap source;
};

std::vector<std::string> experiment_kinds();

/// Parses and checks the envelope {"kind", "seed", "parameters"}; throws ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<inline>");
ExperimentConfig load_config(const std::string& path);
void override_seed(ExperimentConfig& config, std::uint64_t seed);

/// Kind schema plus the assumption metadata checks; throws ConfigError.
void validate(const ExperimentConfig& config);

/// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string config_digest(const nlohmann::json& config);

struct Artifact {
  std::string name;
  std::string content;
};

struct RunResult {
  nlohmann::json results;
  std::vector<Artifact> artifacts;
  int exit_code = kFail;
};

/// Validates, then executes. Thread count is set by the caller (set_max_threads).
RunResult run_experiment(const ExperimentConfig& config);

/// Catalog printed by `mkvlevy list`.
std::string list_builtins();

/// Full `run` subcommand: load, override, run, write results.json and CSVs into out_dir.
int run_command(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
                unsigned threads, std::ostream& log);
int validate_command(const std::string& config_path, std::ostream& log);

}  // namespace mkvlevy::cli
