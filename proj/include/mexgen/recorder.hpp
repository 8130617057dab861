#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mexgen/world.hpp"

namespace mexgen {

// One 10 Hz experience-database row. Time is kept as an integer count of
// tenths so the time column never drifts.
struct FrameRecord {
  long time_tenths = 0;
  Vec3 participant;
  Vec3 controller;
  bool trigger_pressed = false;

  double time_s() const { return static_cast<double>(time_tenths) / 10.0; }
  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

enum class ObjectEvent { Spawn, Fly, Hit, Despawn };

const char* to_string(ObjectEvent e);
std::optional<ObjectEvent> object_event_from_string(std::string_view s);

struct ObjectRecord {
  long object_id = 0;
  double time_s = 0.0;
  Vec3 position;
  ObjectEvent event = ObjectEvent::Fly;

  friend bool operator==(const ObjectRecord&, const ObjectRecord&) = default;
};

// Index of the 10 Hz frame a tick falls in: floor(tick * dt / 0.1).
long frame_index(long tick, double dt);

// Decimates the per-tick world into frame rows and logs projectile lifecycles.
// Must see every tick exactly once, in order.
class Recorder {
 public:
  explicit Recorder(double dt) : dt_(dt) {}

  // Observe the world after `world.tick`, together with the events of that tick.
  // Returns the frame row when the tick opens a new 10 Hz frame.
  std::optional<FrameRecord> observe(const WorldState& world, std::span<const SimEvent> events);

  // Closes the lifecycle of every projectile still in flight.
  void finalize(const WorldState& world);

  const std::vector<FrameRecord>& frames() const { return frames_; }
  const std::vector<ObjectRecord>& objects() const { return objects_; }
  bool corrupt() const { return corrupt_; }

 private:
  double dt_;
  std::optional<long> last_tick_;
  long last_frame_ = -1;
  bool corrupt_ = false;
  bool finalized_ = false;
  std::vector<FrameRecord> frames_;
  std::vector<ObjectRecord> objects_;
};

}  // namespace mexgen
