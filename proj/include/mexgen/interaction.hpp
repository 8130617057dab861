#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mexgen/vec.hpp"

namespace mexgen::interaction {

enum class HandMode { Empty, Holding };

struct HandState {
  HandMode mode = HandMode::Empty;
  std::optional<double> held_since;

  friend bool operator==(const HandState&, const HandState&) = default;
};

struct Sample {
  double t = 0.0;
  Vec3 position;

  friend bool operator==(const Sample&, const Sample&) = default;
};

// Fixed-capacity ring of controller samples with strictly increasing timestamps.
class ControllerHistory {
 public:
  explicit ControllerHistory(std::size_t capacity = 64);

  // Returns false (and stores nothing) if t does not advance past the newest sample.
  bool push(double t, const Vec3& position);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return buf_.size(); }
  bool empty() const { return size_ == 0; }
  // i = 0 is the oldest retained sample.
  const Sample& operator[](std::size_t i) const;
  const Sample& newest() const { return (*this)[size_ - 1]; }

  friend bool operator==(const ControllerHistory& a, const ControllerHistory& b);

 private:
  std::vector<Sample> buf_;
  std::size_t head_ = 0;  // slot of the oldest sample
  std::size_t size_ = 0;
};

struct ThrowEvent {
  double release_t = 0.0;
  Vec3 release_position;
  Vec3 release_velocity;
};

struct BallisticsConfig {
  double velocity_window = 0.1;  // s
  int min_window_samples = 3;

  void validate() const;
};

enum class HandEdge { None, Grab, Throw };

struct HandUpdate {
  HandState hand;
  HandEdge edge = HandEdge::None;
  std::optional<ThrowEvent> thrown;
};

// Trigger edge machine: rising edge grabs, falling edge while holding throws.
HandUpdate hand_update(const HandState& hand, bool trigger_now, bool trigger_prev,
                       const Vec3& controller_pos, const ControllerHistory& history, double t,
                       const BallisticsConfig& config);

// Least-squares slope of position over the samples within `window` of the newest
// one; two-point difference when fewer than min_samples qualify; zero for a
// single sample.
Vec3 estimate_release_velocity(const ControllerHistory& history, double window, int min_samples);

enum class ProjectileState { InFlight, Despawned };
enum class DespawnCause { Ground, Tree, Timeout, SessionEnd };

struct Projectile {
  long id = 0;
  Vec3 position;
  Vec3 velocity;
  ProjectileState state = ProjectileState::InFlight;
  double spawned_at = 0.0;
  std::optional<double> despawned_at;
  std::optional<DespawnCause> despawn_cause;
  std::optional<long> hit_tree;

  friend bool operator==(const Projectile&, const Projectile&) = default;
};

// Exact constant-gravity update along -z.
Projectile ballistic_step(const Projectile& p, double dt, double gravity);

}  // namespace mexgen::interaction
