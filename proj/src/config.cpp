#include "mexgen/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/sha.h>

namespace mexgen {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items())
    if (!allowed.contains(k)) throw ConfigError(where + ": unknown key \"" + k + "\"");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer())
      throw ConfigError(where + "." + key + ": expected an integer");
  } else {
    if (!it->is_number()) throw ConfigError(where + "." + key + ": expected a number");
  }
  out = it->get<T>();
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  reject_unknown(j, "config", {"world", "treadmill", "gait", "ballistics"});
  if (auto it = j.find("world"); it != j.end()) {
    const std::string w = "world";
    reject_unknown(*it, w,
                   {"dt", "gravity", "bloom_duration", "tree_contact_radius", "scatter_radius",
                    "stage_count", "projectile_timeout"});
    read(*it, "dt", c.world.dt, w);
    read(*it, "gravity", c.world.gravity, w);
    read(*it, "bloom_duration", c.world.bloom_duration, w);
    read(*it, "tree_contact_radius", c.world.tree_contact_radius, w);
    read(*it, "scatter_radius", c.world.scatter_radius, w);
    read(*it, "stage_count", c.world.stage_count, w);
    read(*it, "projectile_timeout", c.world.projectile_timeout, w);
  }
  if (auto it = j.find("treadmill"); it != j.end()) {
    const std::string w = "treadmill";
    reject_unknown(*it, w,
                   {"belt_count", "v_max", "surface_extent_x", "surface_extent_y", "dead_zone",
                    "gain", "a_max"});
    read(*it, "belt_count", c.treadmill.belt_count, w);
    read(*it, "v_max", c.treadmill.v_max, w);
    read(*it, "surface_extent_x", c.treadmill.surface_extent_x, w);
    read(*it, "surface_extent_y", c.treadmill.surface_extent_y, w);
    read(*it, "dead_zone", c.treadmill.dead_zone, w);
    read(*it, "gain", c.treadmill.gain, w);
    read(*it, "a_max", c.treadmill.a_max, w);
  }
  if (auto it = j.find("gait"); it != j.end()) {
    const std::string w = "gait";
    reject_unknown(*it, w, {"lift_threshold", "step_length", "ema_alpha", "step_timeout", "v_cap"});
    read(*it, "lift_threshold", c.gait.lift_threshold, w);
    read(*it, "step_length", c.gait.step_length, w);
    read(*it, "ema_alpha", c.gait.ema_alpha, w);
    read(*it, "step_timeout", c.gait.step_timeout, w);
    read(*it, "v_cap", c.gait.v_cap, w);
  }
  if (auto it = j.find("ballistics"); it != j.end()) {
    const std::string w = "ballistics";
    reject_unknown(*it, w, {"velocity_window", "min_window_samples"});
    read(*it, "velocity_window", c.ballistics.velocity_window, w);
    read(*it, "min_window_samples", c.ballistics.min_window_samples, w);
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json to_json(const RunConfig& c) {
  return {
      {"world",
       {{"dt", c.world.dt},
        {"gravity", c.world.gravity},
        {"bloom_duration", c.world.bloom_duration},
        {"tree_contact_radius", c.world.tree_contact_radius},
        {"scatter_radius", c.world.scatter_radius},
        {"stage_count", c.world.stage_count},
        {"projectile_timeout", c.world.projectile_timeout}}},
      {"treadmill",
       {{"belt_count", c.treadmill.belt_count},
        {"v_max", c.treadmill.v_max},
        {"surface_extent_x", c.treadmill.surface_extent_x},
        {"surface_extent_y", c.treadmill.surface_extent_y},
        {"dead_zone", c.treadmill.dead_zone},
        {"gain", c.treadmill.gain},
        {"a_max", c.treadmill.a_max}}},
      {"gait",
       {{"lift_threshold", c.gait.lift_threshold},
        {"step_length", c.gait.step_length},
        {"ema_alpha", c.gait.ema_alpha},
        {"step_timeout", c.gait.step_timeout},
        {"v_cap", c.gait.v_cap}}},
      {"ballistics",
       {{"velocity_window", c.ballistics.velocity_window},
        {"min_window_samples", c.ballistics.min_window_samples}}},
  };
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec s;
  reject_unknown(j, "scenario", {"trees", "start"});
  if (auto it = j.find("trees"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("scenario.trees: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& t = (*it)[i];
      const std::string w = "scenario.trees[" + std::to_string(i) + "]";
      reject_unknown(t, w, {"id", "x", "y", "canopy_z", "stage"});
      if (!t.contains("id")) throw ConfigError(w + ": missing id");
      TreeSpec spec;
      read(t, "id", spec.id, w);
      read(t, "x", spec.x, w);
      read(t, "y", spec.y, w);
      read(t, "canopy_z", spec.canopy_z, w);
      read(t, "stage", spec.stage, w);
      s.trees.push_back(spec);
    }
  }
  if (auto it = j.find("start"); it != j.end()) {
    reject_unknown(*it, "scenario.start", {"x", "y", "yaw"});
    read(*it, "x", s.start_x, "scenario.start");
    read(*it, "y", s.start_y, "scenario.start");
    read(*it, "yaw", s.start_yaw, "scenario.start");
  }
  return s;
}

json to_json(const ScenarioSpec& s) {
  json trees = json::array();
  for (const TreeSpec& t : s.trees) {
    json jt = {{"id", t.id}, {"x", t.x}, {"y", t.y}, {"canopy_z", t.canopy_z}};
    if (t.stage != 0.0) jt["stage"] = t.stage;
    trees.push_back(std::move(jt));
  }
  return {{"trees", trees}, {"start", {{"x", s.start_x}, {"y", s.start_y}, {"yaw", s.start_yaw}}}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_json_file(path));
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path));
}

json archived_config(const RunConfig& config, const ScenarioSpec& scenario) {
  json j = to_json(config);
  j["scenario"] = to_json(scenario);
  return j;
}

void split_archived_config(const json& j, RunConfig& config, ScenarioSpec& scenario) {
  if (!j.is_object() || !j.contains("scenario"))
    throw ConfigError("config.json: missing scenario");
  json rest = j;
  rest.erase("scenario");
  config = run_config_from_json(rest);
  scenario = scenario_from_json(j.at("scenario"));
}

std::string canonical_dump(const json& j) { return j.dump(); }

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md);
  std::ostringstream os;
  for (unsigned char c : md) os << std::hex << std::setw(2) << std::setfill('0') << int(c);
  return os.str();
}

std::string config_digest(const json& archived) { return sha256_hex(canonical_dump(archived)); }

}  // namespace mexgen
