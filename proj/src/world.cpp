#include "mexgen/world.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>

namespace mexgen {

using interaction::DespawnCause;
using interaction::Projectile;
using interaction::ProjectileState;

void WorldConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("world.dt must be > 0");
  // The 10 Hz recorder cannot decimate from a slower tick.
  if (!(dt <= 0.1)) throw std::invalid_argument("world.dt must be <= 0.1");
  if (!(gravity >= 0.0) || !std::isfinite(gravity))
    throw std::invalid_argument("world.gravity must be >= 0");
  if (!(bloom_duration > 0.0)) throw std::invalid_argument("world.bloom_duration must be > 0");
  if (!(tree_contact_radius >= 0.0))
    throw std::invalid_argument("world.tree_contact_radius must be >= 0");
  if (!(scatter_radius >= 0.0)) throw std::invalid_argument("world.scatter_radius must be >= 0");
  if (stage_count < 2) throw std::invalid_argument("world.stage_count must be >= 2");
  if (!(projectile_timeout > 0.0))
    throw std::invalid_argument("world.projectile_timeout must be > 0");
}

void RunConfig::validate() const {
  world.validate();
  treadmill.validate();
  gait.validate();
  ballistics.validate();
}

bool InputFrame::finite() const {
  return std::isfinite(move_x) && std::isfinite(move_y) && std::isfinite(yaw) &&
         std::isfinite(left_h) && std::isfinite(right_h) && mexgen::finite(controller);
}

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Grab: return "grab";
    case EventKind::Throw: return "throw";
    case EventKind::Hit: return "hit";
    case EventKind::BloomStarted: return "bloom_started";
    case EventKind::BloomCompleted: return "bloom_completed";
    case EventKind::Despawn: return "despawn";
    case EventKind::InputRejected: return "input_rejected";
    case EventKind::EdgeContact: return "edge_contact";
  }
  return "unknown";
}

WorldState world_init(const RunConfig& config, const ScenarioSpec& scenario) {
  config.validate();
  WorldState w;
  std::set<long> ids;
  for (const TreeSpec& spec : scenario.trees) {
    if (!ids.insert(spec.id).second)
      throw ScenarioError("DuplicateId(" + std::to_string(spec.id) + ")");
    if (!std::isfinite(spec.x) || !std::isfinite(spec.y) || !std::isfinite(spec.canopy_z))
      throw ScenarioError("NonFinitePosition(tree " + std::to_string(spec.id) + ")");
    if (!(spec.stage >= 0.0 && spec.stage <= 1.0))
      throw ScenarioError("StageOutOfRange(tree " + std::to_string(spec.id) + ")");
    Tree t;
    t.id = spec.id;
    t.position = {spec.x, spec.y, 0.0};
    t.canopy_center = {spec.x, spec.y, spec.canopy_z};
    if (spec.stage > 0.0) {
      t.bloom_stage = spec.stage;
      t.bloom_started_at = -spec.stage * config.world.bloom_duration;
      t.bloom_completed = spec.stage >= 1.0;
    }
    w.trees.push_back(t);
  }
  if (!std::isfinite(scenario.start_x) || !std::isfinite(scenario.start_y) ||
      !std::isfinite(scenario.start_yaw))
    throw ScenarioError("NonFinitePosition(start)");
  w.participant.virtual_position = {scenario.start_x, scenario.start_y, 0.0};
  w.participant.heading_yaw = normalize_angle(scenario.start_yaw);
  w.last_input.yaw = w.participant.heading_yaw;
  return w;
}

Tree bloom_update(const Tree& tree, double now, const WorldConfig& config, bool* completed) {
  if (completed) *completed = false;
  if (!tree.bloom_started_at) return tree;
  Tree next = tree;
  const double stage = std::clamp((now - *tree.bloom_started_at) / config.bloom_duration, 0.0, 1.0);
  next.bloom_stage = std::max(tree.bloom_stage, stage);
  if (next.bloom_stage >= 1.0 && !tree.bloom_completed) {
    next.bloom_completed = true;
    if (completed) *completed = true;
  }
  return next;
}

int discrete_stage(double stage, int n_stages, bool* clamped) {
  const bool out = !(stage >= 0.0 && stage <= 1.0);
  if (clamped) *clamped = out;
  const double s = std::isnan(stage) ? 0.0 : std::clamp(stage, 0.0, 1.0);
  const int idx = static_cast<int>(std::floor(s * (n_stages - 1) + 0.5));
  return std::clamp(idx, 0, n_stages - 1);
}

ImpactResult impact_resolve(const Projectile& p, std::span<const Tree> trees, double now, long tick,
                            const WorldConfig& config) {
  ImpactResult r{p, {}, {}};
  if (p.state != ProjectileState::InFlight) return r;

  std::optional<std::size_t> hit;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trees.size(); ++i) {
    const double d = distance(p.position, trees[i].canopy_center);
    if (d > config.tree_contact_radius) continue;
    if (!hit || d < best || (d == best && trees[i].id < trees[*hit].id)) {
      hit = i;
      best = d;
    }
  }

  auto despawn = [&](DespawnCause cause) {
    r.projectile.state = ProjectileState::Despawned;
    r.projectile.despawned_at = now;
    r.projectile.despawn_cause = cause;
  };

  bool impact = false;
  if (hit) {
    despawn(DespawnCause::Tree);
    r.projectile.hit_tree = trees[*hit].id;
    r.events.push_back({tick, now, EventKind::Hit, p.id, trees[*hit].id, p.position});
    impact = true;
  } else if (p.position.z <= 0.0) {
    despawn(DespawnCause::Ground);
    r.events.push_back({tick, now, EventKind::Hit, p.id, std::nullopt, p.position});
    impact = true;
  } else if (now - p.spawned_at > config.projectile_timeout) {
    despawn(DespawnCause::Timeout);
  }

  if (impact) {
    for (std::size_t i = 0; i < trees.size(); ++i) {
      if (trees[i].bloom_started_at) continue;
      const bool struck = hit && *hit == i;
      if (struck || distance(p.position, trees[i].canopy_center) <= config.scatter_radius) {
        r.bloom_starts.push_back(i);
        r.events.push_back(
            {tick, now, EventKind::BloomStarted, p.id, trees[i].id, trees[i].canopy_center});
      }
    }
  }
  if (r.projectile.state == ProjectileState::Despawned)
    r.events.push_back({tick, now, EventKind::Despawn, p.id, std::nullopt, p.position});
  return r;
}

StepResult world_step(const WorldState& state, const InputFrame& input, const RunConfig& config) {
  StepResult out{state, {}};
  WorldState& w = out.state;
  auto& events = out.events;
  const double dt = config.world.dt;

  std::erase_if(w.projectiles,
                [](const Projectile& p) { return p.state == ProjectileState::Despawned; });

  w.tick = state.tick + 1;
  w.time_s = static_cast<double>(w.tick) * dt;
  const double t = w.time_s;

  InputFrame in = input;
  if (!input.finite()) {
    in = state.last_input;
    events.push_back({w.tick, t, EventKind::InputRejected, std::nullopt, std::nullopt, {}});
  }
  w.last_input = in;

  // (1) locomotion
  Vec2 loco;
  if (in.mode == InputMode::Direct) {
    loco = clamp_norm({in.move_x, in.move_y}, config.gait.v_cap);
  } else {
    w.gait = gait::gait_update(w.gait, {t, in.left_h, in.right_h, in.yaw}, config.gait);
    loco = gait::locomotion_vector(w.gait.speed, in.yaw);
  }
  w.loco_velocity = loco;
  w.participant.heading_yaw = normalize_angle(in.yaw);

  // (2) treadmill
  const treadmill::TreadmillCommand cmd = treadmill::compute_command(
      w.platform.displacement, w.platform.last_command, dt, config.treadmill);
  const bool was_edge = w.platform.edge_contact;
  w.platform = treadmill::plant_step(w.platform, loco, cmd, dt, config.treadmill);
  w.participant.real_displacement = w.platform.displacement;
  if (w.platform.edge_contact && !was_edge)
    events.push_back({w.tick, t, EventKind::EdgeContact, std::nullopt, std::nullopt,
                      {w.platform.displacement.x, w.platform.displacement.y, 0.0}});

  // (3) virtual position
  w.participant.virtual_position.x += loco.x * dt;
  w.participant.virtual_position.y += loco.y * dt;

  // (4) hand
  w.history.push(t, in.controller);
  const interaction::HandUpdate hu =
      interaction::hand_update(w.hand, in.trigger, state.controller.trigger_pressed, in.controller,
                               w.history, t, config.ballistics);
  w.hand = hu.hand;
  w.controller = {in.controller, in.trigger};
  if (hu.edge == interaction::HandEdge::Grab)
    events.push_back({w.tick, t, EventKind::Grab, std::nullopt, std::nullopt, in.controller});
  if (hu.thrown) {
    Projectile p;
    p.id = w.next_object_id++;
    p.position = hu.thrown->release_position;
    p.velocity = hu.thrown->release_velocity;
    p.spawned_at = t;
    w.projectiles.push_back(p);
    events.push_back({w.tick, t, EventKind::Throw, p.id, std::nullopt, p.position});
  }

  // (5) projectiles; ones spawned this tick sit at the release point
  for (Projectile& p : w.projectiles) {
    if (p.state != ProjectileState::InFlight) continue;
    if (p.spawned_at < t) p = interaction::ballistic_step(p, dt, config.world.gravity);
    ImpactResult r = impact_resolve(p, w.trees, t, w.tick, config.world);
    p = r.projectile;
    for (std::size_t i : r.bloom_starts) w.trees[i].bloom_started_at = t;
    events.insert(events.end(), r.events.begin(), r.events.end());
  }

  // (6) bloom
  for (Tree& tree : w.trees) {
    bool completed = false;
    tree = bloom_update(tree, t, config.world, &completed);
    if (completed)
      events.push_back(
          {w.tick, t, EventKind::BloomCompleted, std::nullopt, tree.id, tree.canopy_center});
  }
  return out;
}

namespace {

class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void add(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    add_bytes(&bits, sizeof bits);
  }
  void add(std::int64_t v) { add_bytes(&v, sizeof v); }
  void add(bool v) { add(static_cast<std::int64_t>(v)); }
  void add(const Vec3& v) {
    add(v.x);
    add(v.y);
    add(v.z);
  }
  void add(const Vec2& v) {
    add(v.x);
    add(v.y);
  }
  void add(const std::optional<double>& v) {
    add(v.has_value());
    if (v) add(*v);
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::uint64_t state_hash(const WorldState& w) {
  Fnv1a h;
  h.add(static_cast<std::int64_t>(w.tick));
  h.add(w.time_s);
  h.add(w.participant.virtual_position);
  h.add(w.participant.heading_yaw);
  h.add(w.participant.real_displacement);
  h.add(w.controller.position);
  h.add(w.controller.trigger_pressed);
  for (const Tree& t : w.trees) {
    h.add(static_cast<std::int64_t>(t.id));
    h.add(t.bloom_stage);
    h.add(t.bloom_started_at);
    h.add(t.bloom_completed);
  }
  for (const Projectile& p : w.projectiles) {
    h.add(static_cast<std::int64_t>(p.id));
    h.add(p.position);
    h.add(p.velocity);
    h.add(p.state == ProjectileState::InFlight);
    h.add(p.spawned_at);
    h.add(p.despawned_at);
  }
  h.add(static_cast<std::int64_t>(w.next_object_id));
  h.add(w.platform.displacement);
  h.add(w.platform.last_command.vec());
  h.add(w.gait.cadence_ema);
  h.add(w.gait.speed);
  h.add(w.gait.last_step_t);
  h.add(w.hand.mode == interaction::HandMode::Holding);
  h.add(w.loco_velocity);
  const InputFrame& in = w.last_input;
  h.add(in.mode == InputMode::Trackers);
  h.add(in.move_x);
  h.add(in.move_y);
  h.add(in.yaw);
  h.add(in.left_h);
  h.add(in.right_h);
  h.add(in.controller);
  h.add(in.trigger);
  return h.value();
}

}  // namespace mexgen
