#pragma once

// Experiment configs, the scenario registry and the runner behind the CLI.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace klab {

struct ExperimentConfig {
  std::string scenario;
  nlohmann::json method;      ///< normalized MethodSpec JSON
  std::string operator_name;  ///< "none" for scenarios without an operator
  std::int64_t N = 0;
  double tau = 0.02;
  double epsilon = 0.1;
  int grid_m = 200;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::int64_t offset = 0;  ///< leading indices dropped before evaluation
};

nlohmann::json to_json(const ExperimentConfig& config);

struct ValidationResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;  ///< "<field path>: <problem>", all of them

  bool ok() const { return config.has_value(); }
};

ValidationResult validate_config(const nlohmann::json& j);
ValidationResult validate_config_text(const std::string& text);

struct ScenarioInfo {
  std::string name;
  std::string description;
};

std::vector<ScenarioInfo> list_scenarios();

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ScenarioResult {
  std::string scenario;
  std::vector<Check> checks;
  nlohmann::json report;
  std::vector<std::pair<std::string, std::string>> files;  ///< CSV name -> contents
  std::vector<std::string> summary;                        ///< verdict overview lines

  bool expectation_met() const;
};

/// Executes a validated config without touching the filesystem.
ScenarioResult execute(const ExperimentConfig& config);

inline constexpr int exit_expected = 0;
inline constexpr int exit_config_error = 1;
inline constexpr int exit_mismatch = 2;

/// Writes report.json, the CSVs and summary.txt under `dir`, each through a
/// temporary file renamed into place.
void write_outputs(const ScenarioResult& result, const ExperimentConfig& config,
                   const std::filesystem::path& dir);

std::string summary_text(const ScenarioResult& result, const ExperimentConfig& config);

}  // namespace klab
