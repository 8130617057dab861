#include <doctest.h>

#include <cmath>
#include <random>

#include "mexgen/treadmill.hpp"
#include "mexgen/world.hpp"

using namespace mexgen;
using namespace mexgen::treadmill;

TEST_CASE("compute_command examples") {
  const TreadmillConfig cfg;
  const auto c0 = compute_command({0, 0}, {0, 0}, 0.1, cfg);
  CHECK(c0 == TreadmillCommand{0, 0});

  const auto sat = compute_command({2, 0}, {-0.6, 0}, 0.1, cfg);
  CHECK(sat.vx == doctest::Approx(-0.6).epsilon(1e-15));
  CHECK(sat.vy == 0.0);

  // desired -3 * 0.35 = -1.05 -> -0.6, rate step 2 * 0.1 = 0.2
  const auto ramp = compute_command({0.45, 0}, {0, 0}, 0.1, cfg);
  CHECK(ramp.vx == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(ramp.vy == 0.0);
}

TEST_CASE("compute_command: dead zone and faults") {
  const TreadmillConfig cfg;
  CHECK(compute_command({0.05, -0.05}, {0, 0}, 0.1, cfg) == TreadmillCommand{0, 0});
  CHECK(compute_command({NAN, 0}, {0.3, 0}, 0.1, cfg) == TreadmillCommand{0, 0});
  CHECK(compute_command({INFINITY, 0}, {0.3, 0}, 0.1, cfg) == TreadmillCommand{0, 0});
}

TEST_CASE("compute_command: saturation and rate limit hold for random inputs") {
  const TreadmillConfig cfg;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> d(-1.5, 1.5);
  std::uniform_real_distribution<double> v(-2.0, 2.0);
  for (int i = 0; i < 20000; ++i) {
    const TreadmillCommand prev{v(rng), v(rng)};
    const double dt = 1.0 / 60.0;
    const auto cmd = compute_command({d(rng), d(rng)}, prev, dt, cfg);
    REQUIRE(std::hypot(cmd.vx, cmd.vy) <= cfg.v_max + 1e-12);
    if (std::hypot(prev.vx, prev.vy) <= cfg.v_max) {
      REQUIRE(std::hypot(cmd.vx - prev.vx, cmd.vy - prev.vy) <= cfg.a_max * dt + 1e-12);
    }
  }
}

TEST_CASE("plant_step examples") {
  const TreadmillConfig cfg;
  PlatformState p;
  p.displacement = {0.1, -0.2};
  auto n = plant_step(p, {0.5, 0}, {-0.5, 0}, 0.1, cfg);
  CHECK(n.displacement == p.displacement);
  CHECK(n.last_command == TreadmillCommand{-0.5, 0});

  p.displacement = {0.3, 0.2};
  CHECK(plant_step(p, {0, 0}, {0, 0}, 0.1, cfg).displacement == p.displacement);

  p.displacement = {0, 0};
  n = plant_step(p, {0.55, 0}, {0, 0}, 0.1, cfg);
  CHECK(n.displacement.x == doctest::Approx(0.055).epsilon(1e-14));
  CHECK(n.displacement.y == 0.0);
  CHECK_FALSE(n.edge_contact);
}

TEST_CASE("plant_step clamps at the physical edge") {
  const TreadmillConfig cfg;
  PlatformState p;
  p.displacement = {0.99, -0.99};
  const auto n = plant_step(p, {0.6, -0.6}, {0, 0}, 0.1, cfg);
  CHECK(n.displacement.x == 1.0);
  CHECK(n.displacement.y == -1.0);
  CHECK(n.edge_contact);
}

TEST_CASE("belt_index") {
  const TreadmillConfig cfg;
  CHECK(belt_index({0, -1.0}, cfg) == 0);
  CHECK(belt_index({0, 0.0}, cfg) == 6);
  CHECK(belt_index({0, std::nextafter(1.0, 0.0)}, cfg) == 11);
  CHECK(belt_index({0, 1.0}, cfg) == 11);
  CHECK(belt_index({0, -5.0}, cfg) == 0);
}

TEST_CASE("config validation") {
  TreadmillConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dead_zone = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.belt_count = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

namespace {

struct LoopResult {
  double max_disp = 0.0;
  std::vector<Vec2> virtual_path;
  double settle_disp = 0.0;
};

// Closed loop of command, plant and virtual integration at 60 Hz.
LoopResult closed_loop(const TreadmillConfig& cfg, Vec2 loco, double walk_s, double stop_s) {
  const double dt = 1.0 / 60.0;
  PlatformState plat;
  Vec2 virt;
  LoopResult r;
  const long walk_ticks = std::lround(walk_s / dt);
  const long stop_ticks = std::lround(stop_s / dt);
  for (long i = 0; i < walk_ticks + stop_ticks; ++i) {
    const Vec2 v = i < walk_ticks ? loco : Vec2{};
    const auto cmd = compute_command(plat.displacement, plat.last_command, dt, cfg);
    plat = plant_step(plat, v, cmd, dt, cfg);
    virt += v * dt;
    r.virtual_path.push_back(virt);
    if (i < walk_ticks) r.max_disp = std::max(r.max_disp, norm(plat.displacement));
  }
  r.settle_disp = norm(plat.displacement);
  return r;
}

}  // namespace

TEST_CASE("closed loop: boundedness, recentering, transparency") {
  TreadmillConfig cfg;
  for (double heading : {0.0, 0.7, 2.0, -2.5}) {
    const Vec2 loco{0.55 * std::cos(heading), 0.55 * std::sin(heading)};
    const auto r = closed_loop(cfg, loco, 30.0, 2.0);
    CHECK(r.max_disp <= 0.45);
    CHECK(r.settle_disp < cfg.dead_zone + 0.01);
  }
  const Vec2 loco{0.55, 0.0};
  cfg.gain = 1.0;
  const auto a = closed_loop(cfg, loco, 5.0, 1.0);
  cfg.gain = 10.0;
  cfg.dead_zone = 0.3;
  cfg.a_max = 0.5;
  const auto b = closed_loop(cfg, loco, 5.0, 1.0);
  CHECK(a.virtual_path == b.virtual_path);
}
