#include "mexgen/treadmill.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mexgen::treadmill {

void TreadmillConfig::validate() const {
  if (belt_count < 1) throw std::invalid_argument("treadmill.belt_count must be >= 1");
  if (!(v_max > 0.0)) throw std::invalid_argument("treadmill.v_max must be > 0");
  if (!(gain > 0.0)) throw std::invalid_argument("treadmill.gain must be > 0");
  if (!(a_max > 0.0)) throw std::invalid_argument("treadmill.a_max must be > 0");
  if (!(surface_extent_x > 0.0) || !(surface_extent_y > 0.0))
    throw std::invalid_argument("treadmill.surface_extent must be > 0");
  const double half_min = std::min(surface_extent_x, surface_extent_y) / 2.0;
  if (!(dead_zone > 0.0) || !(dead_zone < half_min))
    throw std::invalid_argument("treadmill.dead_zone must be in (0, min(extent)/2)");
}

TreadmillCommand compute_command(Vec2 displacement, TreadmillCommand prev, double dt,
                                 const TreadmillConfig& config) {
  if (!finite(displacement) || !finite(prev.vec())) return {};

  Vec2 desired{};
  const double dist = norm(displacement);
  if (dist > config.dead_zone) {
    const double speed = config.gain * (dist - config.dead_zone);
    desired = displacement * (-speed / dist);
    desired = clamp_norm(desired, config.v_max);
  }

  const Vec2 from = clamp_norm(prev.vec(), config.v_max);
  const Vec2 step = clamp_norm(desired - from, config.a_max * dt);
  // Both endpoints lie in the v_max ball; the final clamp only absorbs rounding.
  const Vec2 out = clamp_norm(from + step, config.v_max);
  return {out.x, out.y};
}

PlatformState plant_step(const PlatformState& platform, Vec2 loco_vel, TreadmillCommand cmd,
                         double dt, const TreadmillConfig& config) {
  PlatformState next = platform;
  const Vec2 real_vel = loco_vel + cmd.vec();
  Vec2 d = platform.displacement + real_vel * dt;

  const double hx = config.surface_extent_x / 2.0;
  const double hy = config.surface_extent_y / 2.0;
  const Vec2 clamped{std::clamp(d.x, -hx, hx), std::clamp(d.y, -hy, hy)};
  next.edge_contact = !(clamped == d);
  next.displacement = clamped;
  next.last_command = cmd;
  return next;
}

int belt_index(Vec2 displacement, const TreadmillConfig& config) {
  const double ey = config.surface_extent_y;
  const double frac = (displacement.y + ey / 2.0) / ey;
  const double idx = std::floor(frac * config.belt_count);
  if (!(idx >= 0.0)) return 0;
  return static_cast<int>(std::min<double>(idx, config.belt_count - 1));
}

}  // namespace mexgen::treadmill
