#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mexgen/archive.hpp"
#include "mexgen/recorder.hpp"
#include "mexgen/world.hpp"

namespace mexgen {

// A recording simulation run: the world, its 10 Hz recorder and the input log.
// Simulate, replay and the live service all drive the world through this type,
// which is what makes their archives interchangeable.
class Session {
 public:
  Session(RunConfig config, ScenarioSpec scenario, std::string session_id,
          std::string started_at);

  // Quantizes and logs the input, advances one tick and records it.
  std::vector<SimEvent> step(const InputFrame& input);

  const WorldState& world() const { return world_; }
  const RunConfig& config() const { return config_; }
  const std::string& session_id() const { return session_id_; }
  const std::string& config_digest() const { return digest_; }
  const Recorder& recorder() const { return recorder_; }
  const std::vector<std::uint64_t>& hashes() const { return hashes_; }
  long tick() const { return world_.tick; }

  // Closes open projectile lifecycles and packages the archive. Further steps are ignored.
  SessionArchive finalize();

 private:
  RunConfig config_;
  nlohmann::json archived_config_;
  std::string digest_;
  std::string session_id_;
  std::string started_at_;
  WorldState world_;
  Recorder recorder_;
  std::vector<InputRecord> inputs_;
  std::vector<std::uint64_t> hashes_;
  bool finalized_ = false;
};

std::string hash_hex(std::uint64_t h);

struct ReplayResult {
  WorldState final_state;
  std::vector<std::uint64_t> hashes;  // one per tick, ticks 1..N
  SessionArchive regenerated;
};

// Re-runs world_step over the archived input log.
ReplayResult replay(const SessionArchive& archive);

struct ReplayDivergence {
  long tick = 0;
  std::string detail;
};

// Replays and compares the regenerated frames.csv/objects.csv rows against the
// archived file bytes, plus the final state hash. Returns the first divergent tick.
std::optional<ReplayDivergence> verify_replay(const std::filesystem::path& dir);

}  // namespace mexgen
