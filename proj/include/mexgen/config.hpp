#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "mexgen/world.hpp"

namespace mexgen {

// Raised for malformed config or scenario documents (unknown keys, wrong types).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioSpec& scenario);

nlohmann::json read_json_file(const std::filesystem::path& path);
RunConfig load_run_config(const std::filesystem::path& path);
ScenarioSpec load_scenario(const std::filesystem::path& path);

// Document archived next to a session: the run config with the scenario embedded.
nlohmann::json archived_config(const RunConfig& config, const ScenarioSpec& scenario);
void split_archived_config(const nlohmann::json& j, RunConfig& config, ScenarioSpec& scenario);

// Canonical serialization: sorted keys, no whitespace, shortest round-trip numbers.
std::string canonical_dump(const nlohmann::json& j);
std::string sha256_hex(const std::string& bytes);
std::string config_digest(const nlohmann::json& archived);

}  // namespace mexgen
