#include "mexgen/recorder.hpp"

#include <cmath>
#include <spdlog/spdlog.h>

namespace mexgen {

using interaction::ProjectileState;

const char* to_string(ObjectEvent e) {
  switch (e) {
    case ObjectEvent::Spawn: return "spawn";
    case ObjectEvent::Fly: return "fly";
    case ObjectEvent::Hit: return "hit";
    case ObjectEvent::Despawn: return "despawn";
  }
  return "fly";
}

std::optional<ObjectEvent> object_event_from_string(std::string_view s) {
  if (s == "spawn") return ObjectEvent::Spawn;
  if (s == "fly") return ObjectEvent::Fly;
  if (s == "hit") return ObjectEvent::Hit;
  if (s == "despawn") return ObjectEvent::Despawn;
  return std::nullopt;
}

long frame_index(long tick, double dt) {
  // The epsilon absorbs rounding when tick * dt lands exactly on a boundary.
  return static_cast<long>(std::floor(static_cast<double>(tick) * dt * 10.0 + 1e-9));
}

std::optional<FrameRecord> Recorder::observe(const WorldState& world,
                                             std::span<const SimEvent> events) {
  if (finalized_ || (last_tick_ && world.tick != *last_tick_ + 1)) {
    if (!corrupt_) spdlog::error("recorder: out-of-order tick {}", world.tick);
    corrupt_ = true;
    return std::nullopt;
  }
  last_tick_ = world.tick;

  for (const SimEvent& e : events) {
    if (!e.projectile_id) continue;
    switch (e.kind) {
      case EventKind::Throw:
        objects_.push_back({*e.projectile_id, e.time_s, e.position, ObjectEvent::Spawn});
        break;
      case EventKind::Hit:
        objects_.push_back({*e.projectile_id, e.time_s, e.position, ObjectEvent::Hit});
        break;
      case EventKind::Despawn:
        objects_.push_back({*e.projectile_id, e.time_s, e.position, ObjectEvent::Despawn});
        break;
      default:
        break;
    }
  }

  const long k = frame_index(world.tick, dt_);
  if (k <= last_frame_) return std::nullopt;
  last_frame_ = k;

  for (const auto& p : world.projectiles)
    if (p.state == ProjectileState::InFlight && p.spawned_at < world.time_s)
      objects_.push_back({p.id, world.time_s, p.position, ObjectEvent::Fly});

  FrameRecord f{k, world.participant.virtual_position, world.controller.position,
                world.controller.trigger_pressed};
  frames_.push_back(f);
  return f;
}

void Recorder::finalize(const WorldState& world) {
  if (finalized_) return;
  finalized_ = true;
  for (const auto& p : world.projectiles)
    if (p.state == ProjectileState::InFlight)
      objects_.push_back({p.id, world.time_s, p.position, ObjectEvent::Despawn});
}

}  // namespace mexgen
