#pragma once

#include <optional>

#include "mexgen/vec.hpp"

namespace mexgen::gait {

struct FootFrame {
  double t = 0.0;        // s
  double left_h = 0.0;   // m above floor
  double right_h = 0.0;  // m above floor
  double yaw = 0.0;      // facing direction, rad
};

struct GaitConfig {
  double lift_threshold = 0.05;  // m
  double step_length = 0.5;      // m per step
  double ema_alpha = 0.3;
  double step_timeout = 1.0;  // s
  double v_cap = 0.6;         // m/s

  void validate() const;
};

struct GaitState {
  bool left_above = false;
  bool right_above = false;
  std::optional<double> last_step_t;
  double cadence_ema = 0.0;  // steps/s
  double speed = 0.0;        // m/s, in [0, v_cap]
  long step_count = 0;

  friend bool operator==(const GaitState&, const GaitState&) = default;
};

// Walk-in-place detector. A step is a per-foot rising edge through lift_threshold.
// Frames with non-finite or negative heights are dropped.
GaitState gait_update(const GaitState& state, const FootFrame& frame, const GaitConfig& config);

Vec2 locomotion_vector(double speed, double yaw);

}  // namespace mexgen::gait
