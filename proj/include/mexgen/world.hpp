#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mexgen/gait.hpp"
#include "mexgen/interaction.hpp"
#include "mexgen/treadmill.hpp"
#include "mexgen/vec.hpp"

namespace mexgen {

struct WorldConfig {
  double dt = 1.0 / 60.0;            // s, fixed tick
  double gravity = 9.81;             // m/s^2 along -z
  double bloom_duration = 5.0;       // s, linear ramp 0 -> 1
  double tree_contact_radius = 1.0;  // m around the canopy center
  double scatter_radius = 2.0;       // m, area effect of one impact
  int stage_count = 4;               // visual stages incl. withered and full bloom
  double projectile_timeout = 10.0;  // s

  void validate() const;
};

struct RunConfig {
  WorldConfig world;
  treadmill::TreadmillConfig treadmill;
  gait::GaitConfig gait;
  interaction::BallisticsConfig ballistics;

  void validate() const;
};

struct Tree {
  long id = 0;
  Vec3 position;  // trunk base, z = 0
  Vec3 canopy_center;
  double bloom_stage = 0.0;
  std::optional<double> bloom_started_at;
  bool bloom_completed = false;

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct ParticipantState {
  Vec3 virtual_position;
  double heading_yaw = 0.0;  // (-pi, pi]
  Vec2 real_displacement;

  friend bool operator==(const ParticipantState&, const ParticipantState&) = default;
};

struct ControllerState {
  Vec3 position;
  bool trigger_pressed = false;

  friend bool operator==(const ControllerState&, const ControllerState&) = default;
};

enum class InputMode { Direct, Trackers };

// One tick of operator input. Direct mode steers with (move_x, move_y, yaw);
// tracker mode feeds foot heights and yaw through the walk-in-place detector.
struct InputFrame {
  InputMode mode = InputMode::Direct;
  double move_x = 0.0;
  double move_y = 0.0;
  double yaw = 0.0;
  double left_h = 0.0;
  double right_h = 0.0;
  Vec3 controller;
  bool trigger = false;

  bool finite() const;
  friend bool operator==(const InputFrame&, const InputFrame&) = default;
};

struct WorldState {
  long tick = 0;
  double time_s = 0.0;
  ParticipantState participant;
  ControllerState controller;
  std::vector<Tree> trees;
  std::vector<interaction::Projectile> projectiles;
  long next_object_id = 1;

  treadmill::PlatformState platform;
  gait::GaitState gait;
  interaction::HandState hand;
  interaction::ControllerHistory history;
  Vec2 loco_velocity;
  InputFrame last_input;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

enum class EventKind {
  Grab,
  Throw,
  Hit,
  BloomStarted,
  BloomCompleted,
  Despawn,
  InputRejected,
  EdgeContact,
};

const char* to_string(EventKind kind);

struct SimEvent {
  long tick = 0;
  double time_s = 0.0;
  EventKind kind = EventKind::Grab;
  std::optional<long> projectile_id;
  std::optional<long> tree_id;
  Vec3 position;  // spawn/impact/despawn point where meaningful

  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

struct TreeSpec {
  long id = 0;
  double x = 0.0;
  double y = 0.0;
  double canopy_z = 0.0;
  double stage = 0.0;  // initial bloom stage override
};

struct ScenarioSpec {
  std::vector<TreeSpec> trees;
  double start_x = 0.0;
  double start_y = 0.0;
  double start_yaw = 0.0;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

WorldState world_init(const RunConfig& config, const ScenarioSpec& scenario);

struct StepResult {
  WorldState state;
  std::vector<SimEvent> events;
};

// Fixed sub-step order: locomotion, treadmill, virtual position, hand, projectiles, bloom.
StepResult world_step(const WorldState& state, const InputFrame& input, const RunConfig& config);

// Advances the ramp of a tree whose bloom has started. Sets `completed` on the
// call where the stage first reaches 1.
Tree bloom_update(const Tree& tree, double now, const WorldConfig& config,
                  bool* completed = nullptr);

// Nearest visual stage: 0 = withered, n_stages-1 = full bloom. Out-of-range
// input is clamped and reported through `clamped`.
int discrete_stage(double stage, int n_stages, bool* clamped = nullptr);

struct ImpactResult {
  interaction::Projectile projectile;
  std::vector<SimEvent> events;
  std::vector<std::size_t> bloom_starts;  // indices into the tree list
};

// Tree contact (nearest canopy, ties to lower id), then ground, then timeout.
ImpactResult impact_resolve(const interaction::Projectile& p, std::span<const Tree> trees,
                            double now, long tick, const WorldConfig& config);

std::uint64_t state_hash(const WorldState& state);

}  // namespace mexgen
