#include "mexgen/gait.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mexgen::gait {

void GaitConfig::validate() const {
  if (!(lift_threshold > 0.0)) throw std::invalid_argument("gait.lift_threshold must be > 0");
  if (!(v_cap > 0.0)) throw std::invalid_argument("gait.v_cap must be > 0");
  if (!(step_length >= 0.0)) throw std::invalid_argument("gait.step_length must be >= 0");
  if (!(ema_alpha > 0.0 && ema_alpha <= 1.0))
    throw std::invalid_argument("gait.ema_alpha must be in (0, 1]");
  if (!(step_timeout > 0.0)) throw std::invalid_argument("gait.step_timeout must be > 0");
}

namespace {

bool valid_height(double h) { return std::isfinite(h) && h >= 0.0; }

}  // namespace

GaitState gait_update(const GaitState& state, const FootFrame& frame, const GaitConfig& config) {
  if (!valid_height(frame.left_h) || !valid_height(frame.right_h) || !std::isfinite(frame.t))
    return state;

  GaitState next = state;
  const bool left = frame.left_h > config.lift_threshold;
  const bool right = frame.right_h > config.lift_threshold;
  const int steps = (left && !state.left_above ? 1 : 0) + (right && !state.right_above ? 1 : 0);
  next.left_above = left;
  next.right_above = right;

  for (int i = 0; i < steps; ++i) {
    ++next.step_count;
    if (next.last_step_t) {
      const double interval = frame.t - *next.last_step_t;
      if (interval > 0.0) {
        const double rate = 1.0 / interval;
        // First interval after a reset seeds the average.
        next.cadence_ema = next.cadence_ema == 0.0
                               ? rate
                               : config.ema_alpha * rate + (1.0 - config.ema_alpha) * next.cadence_ema;
      }
    }
    next.last_step_t = frame.t;
  }

  if (next.last_step_t && frame.t - *next.last_step_t > config.step_timeout) {
    next.cadence_ema = 0.0;
    next.last_step_t.reset();
  }
  next.speed = std::min(config.v_cap, config.step_length * next.cadence_ema);
  return next;
}

Vec2 locomotion_vector(double speed, double yaw) {
  return {speed * std::cos(yaw), speed * std::sin(yaw)};
}

}  // namespace mexgen::gait
