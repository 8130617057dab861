#pragma once

#include "mexgen/vec.hpp"

namespace mexgen::treadmill {

struct TreadmillConfig {
  int belt_count = 12;
  double v_max = 0.6;             // m/s, device walking-speed limit
  double surface_extent_x = 2.0;  // m
  double surface_extent_y = 2.0;  // m
  double dead_zone = 0.10;        // m
  double gain = 3.0;              // 1/s
  double a_max = 2.0;             // m/s^2

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Velocity the surface imparts to the walker: x from the belts, y from torus rotation.
struct TreadmillCommand {
  double vx = 0.0;
  double vy = 0.0;

  Vec2 vec() const { return {vx, vy}; }
  friend bool operator==(const TreadmillCommand&, const TreadmillCommand&) = default;
};

struct PlatformState {
  Vec2 displacement;  // walker offset from platform center
  TreadmillCommand last_command;
  bool edge_contact = false;  // displacement was clamped on the last plant step

  friend bool operator==(const PlatformState&, const PlatformState&) = default;
};

// Recentering law: proportional outside the dead zone, saturated to v_max and
// rate limited to a_max. A non-finite displacement yields a zero command.
TreadmillCommand compute_command(Vec2 displacement, TreadmillCommand prev, double dt,
                                 const TreadmillConfig& config);

// Kinematic superposition plant; clamps the walker at the physical edge.
PlatformState plant_step(const PlatformState& platform, Vec2 loco_vel, TreadmillCommand cmd,
                         double dt, const TreadmillConfig& config);

// Index of the belt under the walker, 0 at -y edge.
int belt_index(Vec2 displacement, const TreadmillConfig& config);

}  // namespace mexgen::treadmill
