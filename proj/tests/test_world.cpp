#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "mexgen/world.hpp"

using namespace mexgen;
using interaction::DespawnCause;
using interaction::Projectile;
using interaction::ProjectileState;

namespace {

ScenarioSpec three_trees() {
  ScenarioSpec s;
  s.trees = {{1, 5.0, 0.0, 2.5}, {2, 6.5, 0.0, 2.5}, {3, 20.0, 0.0, 2.5}};
  return s;
}

long count(const std::vector<SimEvent>& ev, EventKind k) {
  return std::count_if(ev.begin(), ev.end(), [k](const SimEvent& e) { return e.kind == k; });
}

}  // namespace

TEST_CASE("world_init") {
  const RunConfig cfg;
  const WorldState empty = world_init(cfg, {});
  CHECK(empty.trees.empty());
  CHECK(empty.tick == 0);
  CHECK(empty.time_s == 0.0);

  const WorldState w = world_init(cfg, three_trees());
  REQUIRE(w.trees.size() == 3);
  for (const Tree& t : w.trees) {
    CHECK(t.bloom_stage == 0.0);
    CHECK_FALSE(t.bloom_started_at);
    CHECK(t.position.z == 0.0);
  }
  CHECK(w.projectiles.empty());
  CHECK(w.platform.displacement == Vec2{0, 0});

  ScenarioSpec dup;
  dup.trees = {{7, 0, 0, 2}, {7, 1, 1, 2}};
  CHECK_THROWS_WITH_AS(world_init(cfg, dup), "DuplicateId(7)", ScenarioError);

  ScenarioSpec bad;
  bad.trees = {{1, NAN, 0, 2}};
  CHECK_THROWS_AS(world_init(cfg, bad), ScenarioError);

  ScenarioSpec start;
  start.start_x = 3;
  start.start_y = -1;
  start.start_yaw = 4.0;
  const WorldState ws = world_init(cfg, start);
  CHECK(ws.participant.virtual_position == Vec3{3, -1, 0});
  CHECK(ws.participant.heading_yaw == doctest::Approx(4.0 - 2 * 3.14159265358979323846));
}

TEST_CASE("quiescence: zero input changes only the clock") {
  const RunConfig cfg;
  WorldState w = world_init(cfg, three_trees());
  const WorldState w0 = w;
  for (int i = 0; i < 120; ++i) {
    auto r = world_step(w, {}, cfg);
    CHECK(r.events.empty());
    w = r.state;
  }
  CHECK(w.tick == 120);
  CHECK(w.time_s == 120 * cfg.world.dt);
  CHECK(w.participant == w0.participant);
  CHECK(w.controller == w0.controller);
  CHECK(w.trees == w0.trees);
  CHECK(w.projectiles.empty());
  CHECK(w.platform == w0.platform);
}

TEST_CASE("hold trigger two ticks then release: exactly one throw on release") {
  const RunConfig cfg;
  WorldState w = world_init(cfg, {});
  InputFrame in;
  in.controller = {0, 0, 1.5};
  std::vector<std::vector<SimEvent>> per_tick;
  for (bool trig : {false, true, true, false, false}) {
    in.trigger = trig;
    auto r = world_step(w, in, cfg);
    per_tick.push_back(r.events);
    w = r.state;
  }
  CHECK(count(per_tick[1], EventKind::Grab) == 1);
  CHECK(count(per_tick[3], EventKind::Throw) == 1);
  long throws = 0;
  for (const auto& ev : per_tick) throws += count(ev, EventKind::Throw);
  CHECK(throws == 1);
  REQUIRE(w.projectiles.size() == 1);
  CHECK(w.projectiles[0].spawned_at == 4 * cfg.world.dt);
}

TEST_CASE("release position equals controller position at the release tick") {
  const RunConfig cfg;
  WorldState w = world_init(cfg, {});
  InputFrame in;
  for (int i = 0; i < 30; ++i) {
    in.controller = {0.013 * i, -0.02 * i, 1.4 + 0.01 * i};
    in.trigger = i < 29;
    auto r = world_step(w, in, cfg);
    w = r.state;
    for (const SimEvent& e : r.events)
      if (e.kind == EventKind::Throw) CHECK(e.position == in.controller);
  }
  REQUIRE(w.projectiles.size() == 1);
  CHECK(w.projectiles[0].position == in.controller);
  CHECK(w.projectiles[0].velocity.x == doctest::Approx(0.013 * 60).epsilon(1e-9));
}

TEST_CASE("non-finite input repeats the previous input") {
  const RunConfig cfg;
  WorldState w = world_init(cfg, {});
  InputFrame good;
  good.move_x = 0.3;
  w = world_step(w, good, cfg).state;
  InputFrame bad = good;
  bad.move_y = NAN;
  auto r = world_step(w, bad, cfg);
  CHECK(count(r.events, EventKind::InputRejected) == 1);
  CHECK(r.state.last_input == good);
  CHECK(r.state.loco_velocity == Vec2{0.3, 0.0});
}

TEST_CASE("bloom_update") {
  const WorldConfig cfg;
  Tree t;
  t.bloom_started_at = 2.0;
  CHECK(bloom_update(t, 2.0, cfg).bloom_stage == 0.0);
  CHECK(bloom_update(t, 4.5, cfg).bloom_stage == 0.5);
  bool done = false;
  const Tree full = bloom_update(t, 7.0, cfg, &done);
  CHECK(full.bloom_stage == 1.0);
  CHECK(done);
  bloom_update(full, 8.0, cfg, &done);
  CHECK_FALSE(done);
  const Tree idle = bloom_update(Tree{}, 100.0, cfg);
  CHECK(idle.bloom_stage == 0.0);
}

TEST_CASE("discrete_stage") {
  CHECK(discrete_stage(0.0, 4) == 0);
  CHECK(discrete_stage(1.0, 4) == 3);
  CHECK(discrete_stage(0.4, 4) == 1);  // 0.4 * 3 + 0.5 = 1.7
  bool clamped = false;
  CHECK(discrete_stage(1.5, 4, &clamped) == 3);
  CHECK(clamped);
  CHECK(discrete_stage(-0.2, 4, &clamped) == 0);
  CHECK(clamped);
  discrete_stage(0.5, 4, &clamped);
  CHECK_FALSE(clamped);
}

TEST_CASE("impact_resolve") {
  const WorldConfig cfg;
  std::vector<Tree> trees;
  for (const TreeSpec& s : three_trees().trees) {
    Tree t;
    t.id = s.id;
    t.position = {s.x, s.y, 0};
    t.canopy_center = {s.x, s.y, s.canopy_z};
    trees.push_back(t);
  }

  SUBCASE("ground") {
    Projectile p;
    p.id = 4;
    p.position = {50, 50, -0.01};
    const auto r = impact_resolve(p, trees, 3.0, 180, cfg);
    CHECK(r.projectile.state == ProjectileState::Despawned);
    CHECK(r.projectile.despawn_cause == DespawnCause::Ground);
    CHECK(r.projectile.despawned_at == 3.0);
    CHECK(r.bloom_starts.empty());
    CHECK(count(r.events, EventKind::Hit) == 1);
    CHECK(count(r.events, EventKind::Despawn) == 1);
  }
  SUBCASE("canopy center hit blooms neighbours within scatter radius") {
    Projectile p;
    p.position = trees[0].canopy_center;
    const auto r = impact_resolve(p, trees, 1.0, 60, cfg);
    CHECK(r.projectile.despawn_cause == DespawnCause::Tree);
    CHECK(r.projectile.hit_tree == 1);
    CHECK(r.bloom_starts == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("nearest contact wins, ties to lower id") {
    std::vector<Tree> pair(2);
    pair[0].id = 9;
    pair[0].canopy_center = {0, 0, 2};
    pair[1].id = 4;
    pair[1].canopy_center = {1, 0, 2};
    Projectile p;
    p.position = {0.5, 0, 2};
    CHECK(impact_resolve(p, pair, 1.0, 60, cfg).projectile.hit_tree == 4);
    p.position = {0.4, 0, 2};
    CHECK(impact_resolve(p, pair, 1.0, 60, cfg).projectile.hit_tree == 9);
  }
  SUBCASE("timeout") {
    Projectile p;
    p.position = {0, 0, 100};
    p.spawned_at = 0.0;
    CHECK(impact_resolve(p, trees, 10.0, 600, cfg).projectile.state == ProjectileState::InFlight);
    const auto r = impact_resolve(p, trees, 10.0 + 1.0 / 60, 601, cfg);
    CHECK(r.projectile.despawn_cause == DespawnCause::Timeout);
    CHECK(count(r.events, EventKind::Hit) == 0);
  }
  SUBCASE("already blooming trees are not restarted") {
    trees[1].bloom_started_at = 0.5;
    Projectile p;
    p.position = trees[0].canopy_center;
    CHECK(impact_resolve(p, trees, 1.0, 60, cfg).bloom_starts == std::vector<std::size_t>{0});
  }
}

namespace {

InputFrame random_input(std::mt19937_64& rng, long tick) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  InputFrame in;
  in.mode = (tick / 240) % 2 == 0 ? InputMode::Direct : InputMode::Trackers;
  in.move_x = 0.5 * u(rng);
  in.move_y = 0.5 * u(rng);
  in.yaw = 3.0 * u(rng);
  in.left_h = std::max(0.0, 0.1 * u(rng));
  in.right_h = std::max(0.0, 0.1 * u(rng));
  const double t = tick / 60.0;
  in.controller = {5.0 + std::sin(t), std::cos(1.3 * t), 1.5 + 0.3 * std::sin(2 * t)};
  in.trigger = (tick / 25) % 3 != 0;
  return in;
}

}  // namespace

TEST_CASE("determinism and event causality over a random stream") {
  const RunConfig cfg;
  std::mt19937_64 rng(99);
  std::vector<InputFrame> inputs;
  for (long i = 0; i < 1800; ++i) inputs.push_back(random_input(rng, i));

  auto run = [&](std::vector<std::uint64_t>& hashes, std::vector<SimEvent>& all) {
    WorldState w = world_init(cfg, three_trees());
    for (const InputFrame& in : inputs) {
      auto r = world_step(w, in, cfg);
      w = std::move(r.state);
      hashes.push_back(state_hash(w));
      all.insert(all.end(), r.events.begin(), r.events.end());
    }
    return w;
  };
  std::vector<std::uint64_t> h1, h2;
  std::vector<SimEvent> e1, e2;
  const WorldState a = run(h1, e1);
  const WorldState b = run(h2, e2);
  CHECK(h1 == h2);
  CHECK(e1 == e2);
  CHECK(a == b);

  std::map<long, int> thrown;
  std::map<long, int> hits;
  std::set<long> hit_seen;
  long grabs = 0, throws = 0;
  for (const SimEvent& e : e1) {
    REQUIRE(e.time_s == e.tick * cfg.world.dt);
    if (e.kind == EventKind::Grab) ++grabs;
    if (e.kind == EventKind::Throw) {
      ++throws;
      ++thrown[*e.projectile_id];
      REQUIRE(throws <= grabs);
    }
    if (e.kind == EventKind::Hit) {
      REQUIRE(thrown[*e.projectile_id] == 1);
      ++hits[*e.projectile_id];
      hit_seen.insert(*e.projectile_id);
    }
    if (e.kind == EventKind::BloomStarted) REQUIRE(hit_seen.contains(*e.projectile_id));
  }
  CHECK(throws > 5);
  for (const auto& [id, n] : hits) CHECK(n == 1);
}

TEST_CASE("clock has no drift") {
  RunConfig cfg;
  cfg.world.dt = 0.01;
  WorldState w = world_init(cfg, {});
  for (int i = 0; i < 100000; ++i) w = world_step(w, {}, cfg).state;
  CHECK(w.time_s == 100000 * 0.01);
}
