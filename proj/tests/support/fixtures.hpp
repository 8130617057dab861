#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "mexgen/session.hpp"
#include "mexgen/world.hpp"

namespace testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> n{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mexgen-test-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline mexgen::ScenarioSpec orchard() {
  mexgen::ScenarioSpec s;
  s.trees = {{1, 4.0, 0.0, 2.5}, {2, 4.0, 3.0, 2.5}, {3, -3.0, -2.0, 2.5}};
  return s;
}

// Walks forward while swinging the controller and releasing once: hold from
// `grab` to `release` with the controller moving at `v`.
inline std::vector<mexgen::InputFrame> throw_script(long ticks, long grab, long release,
                                                    mexgen::Vec3 v, double dt = 1.0 / 60.0) {
  std::vector<mexgen::InputFrame> out;
  const mexgen::Vec3 rest{0.3, 0.0, 1.2};
  for (long t = 1; t <= ticks; ++t) {
    mexgen::InputFrame in;
    in.move_x = 0.3;
    in.controller = rest;
    if (t >= grab && t < release) {
      const double s = (t - grab) * dt;
      in.controller = rest + v * s;
      in.trigger = true;
    }
    out.push_back(in);
  }
  return out;
}

// Random operator: walks, turns and throws at random.
inline std::vector<mexgen::InputFrame> random_script(unsigned seed, long ticks) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<mexgen::InputFrame> out;
  mexgen::Vec3 c{0.3, 0.0, 1.2};
  mexgen::Vec3 cv{0, 0, 0};
  bool trig = false;
  double mx = 0, my = 0, yaw = 0;
  for (long t = 1; t <= ticks; ++t) {
    if (t % 30 == 1) {
      mx = 0.6 * u(rng);
      my = 0.6 * u(rng);
      yaw += 0.3 * u(rng);
    }
    if (t % 20 == 1) {
      trig = u(rng) > 0.0;
      cv = {4.0 * u(rng), 4.0 * u(rng), 2.0 + 2.0 * u(rng)};
    }
    c = trig ? c + cv * (1.0 / 60.0) : mexgen::Vec3{0.3, 0.0, 1.2};
    mexgen::InputFrame in;
    in.move_x = mx;
    in.move_y = my;
    in.yaw = yaw;
    in.controller = c;
    in.trigger = trig;
    out.push_back(in);
  }
  return out;
}

inline mexgen::SessionArchive run_session(const std::vector<mexgen::InputFrame>& script,
                                          const mexgen::ScenarioSpec& scenario = orchard(),
                                          const mexgen::RunConfig& config = {},
                                          const std::string& id = "test-session") {
  mexgen::Session s(config, scenario, id, "2026-01-01T00:00:00Z");
  for (const auto& in : script) s.step(in);
  return s.finalize();
}

}  // namespace testing
