#include "mexgen/interaction.hpp"

#include <cassert>
#include <stdexcept>

namespace mexgen::interaction {

ControllerHistory::ControllerHistory(std::size_t capacity) : buf_(capacity == 0 ? 1 : capacity) {}

bool ControllerHistory::push(double t, const Vec3& position) {
  if (size_ > 0 && !(t > newest().t)) return false;
  if (size_ < buf_.size()) {
    buf_[(head_ + size_) % buf_.size()] = {t, position};
    ++size_;
  } else {
    buf_[head_] = {t, position};
    head_ = (head_ + 1) % buf_.size();
  }
  return true;
}

const Sample& ControllerHistory::operator[](std::size_t i) const {
  assert(i < size_);
  return buf_[(head_ + i) % buf_.size()];
}

bool operator==(const ControllerHistory& a, const ControllerHistory& b) {
  if (a.size_ != b.size_ || a.capacity() != b.capacity()) return false;
  for (std::size_t i = 0; i < a.size_; ++i)
    if (!(a[i] == b[i])) return false;
  return true;
}

void BallisticsConfig::validate() const {
  if (!(velocity_window > 0.0))
    throw std::invalid_argument("ballistics.velocity_window must be > 0");
  if (min_window_samples < 2)
    throw std::invalid_argument("ballistics.min_window_samples must be >= 2");
}

HandUpdate hand_update(const HandState& hand, bool trigger_now, bool trigger_prev,
                       const Vec3& controller_pos, const ControllerHistory& history, double t,
                       const BallisticsConfig& config) {
  HandUpdate out{hand, HandEdge::None, std::nullopt};
  if (trigger_now && !trigger_prev) {
    if (hand.mode == HandMode::Empty) {
      out.hand = {HandMode::Holding, t};
      out.edge = HandEdge::Grab;
    }
  } else if (!trigger_now && trigger_prev) {
    if (hand.mode == HandMode::Holding) {
      out.hand = {};
      out.edge = HandEdge::Throw;
      out.thrown = ThrowEvent{
          t, controller_pos,
          estimate_release_velocity(history, config.velocity_window, config.min_window_samples)};
    }
  }
  return out;
}

Vec3 estimate_release_velocity(const ControllerHistory& history, double window, int min_samples) {
  const std::size_t n = history.size();
  if (n < 2) return {};

  // Tolerance keeps samples sitting exactly on the window edge despite rounding in t.
  const double t_newest = history.newest().t;
  const double cutoff = t_newest - window - 1e-9;
  std::size_t first = n - 1;
  while (first > 0 && history[first - 1].t >= cutoff) --first;
  const std::size_t count = n - first;

  if (count < static_cast<std::size_t>(min_samples)) {
    const Sample& a = history[n - 2];
    const Sample& b = history[n - 1];
    return (b.position - a.position) * (1.0 / (b.t - a.t));
  }

  // Centered times keep the normal equation well conditioned.
  double t_mean = 0.0;
  Vec3 p_mean;
  for (std::size_t i = first; i < n; ++i) {
    t_mean += history[i].t;
    p_mean += history[i].position;
  }
  t_mean /= static_cast<double>(count);
  p_mean = p_mean * (1.0 / static_cast<double>(count));

  double stt = 0.0;
  Vec3 stp;
  for (std::size_t i = first; i < n; ++i) {
    const double dt = history[i].t - t_mean;
    stt += dt * dt;
    stp += (history[i].position - p_mean) * dt;
  }
  return stp * (1.0 / stt);
}

Projectile ballistic_step(const Projectile& p, double dt, double gravity) {
  Projectile next = p;
  const double dz = -gravity * dt;
  next.position.x += p.velocity.x * dt;
  next.position.y += p.velocity.y * dt;
  next.position.z += p.velocity.z * dt + 0.5 * dz * dt;
  next.velocity.z += dz;
  return next;
}

}  // namespace mexgen::interaction
