#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mexgen/archive.hpp"

namespace mexgen::analytics {

struct TrackPoint {
  double t = 0.0;
  Vec3 position;
};

struct ThrowSegment {
  long object_id = 0;
  ObjectRecord release;                // spawn row
  std::vector<TrackPoint> track;       // spawn, fly..., despawn
  std::optional<ObjectRecord> impact;  // hit row, absent for timeouts and session end
};

// One segment per object id, ordered by id.
std::vector<ThrowSegment> segment_throws(const SessionArchive& archive);

class DegenerateTrack : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParabolaFit {
  double g_est = 0.0;
  Vec3 v0_est;
  Vec3 p0_est;
  double rms_residual = 0.0;  // m, RMS of the 3D residual vector
};

// Per-axis least-squares quadratic in (t - t_first).
ParabolaFit fit_parabola(const std::vector<TrackPoint>& track);

// Drops points that share a timestamp with the previous point.
std::vector<TrackPoint> distinct_times(const std::vector<TrackPoint>& track);

struct AlignmentEntry {
  long object_id = 0;
  std::optional<double> distance_m;  // absent when the spawn falls outside frame coverage
};

struct AlignmentReport {
  std::vector<AlignmentEntry> throws;
  std::optional<double> max_m;

  nlohmann::json to_json() const;
};

// Distance from each spawn point to the controller position interpolated
// linearly between the bracketing 10 Hz frames.
AlignmentReport check_spawn_alignment(const SessionArchive& archive);

enum class PlotKind { Throws3d, Paths2d };

std::optional<PlotKind> plot_kind_from_string(const std::string& s);

// Deterministic SVG 1.1 document.
std::string export_plot(const SessionArchive& archive, PlotKind kind);

// Legend colors.
inline constexpr const char* kAshColor = "#1f77b4";
inline constexpr const char* kControllerColor = "#ff7f0e";
inline constexpr const char* kParticipantColor = "#d62728";

}  // namespace mexgen::analytics
