#include "mexgen/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "mexgen/config.hpp"

namespace mexgen::analytics {

std::vector<ThrowSegment> segment_throws(const SessionArchive& archive) {
  std::map<long, ThrowSegment> by_id;
  for (const ObjectRecord& o : archive.objects) {
    ThrowSegment& seg = by_id[o.object_id];
    seg.object_id = o.object_id;
    switch (o.event) {
      case ObjectEvent::Spawn:
        seg.release = o;
        seg.track.push_back({o.time_s, o.position});
        break;
      case ObjectEvent::Fly:
      case ObjectEvent::Despawn:
        seg.track.push_back({o.time_s, o.position});
        break;
      case ObjectEvent::Hit:
        seg.impact = o;
        break;
    }
  }
  std::vector<ThrowSegment> out;
  out.reserve(by_id.size());
  for (auto& [_, seg] : by_id) out.push_back(std::move(seg));
  return out;
}

std::vector<TrackPoint> distinct_times(const std::vector<TrackPoint>& track) {
  std::vector<TrackPoint> out;
  for (const TrackPoint& p : track)
    if (out.empty() || p.t != out.back().t) out.push_back(p);
  return out;
}

ParabolaFit fit_parabola(const std::vector<TrackPoint>& track) {
  const auto n = static_cast<Eigen::Index>(track.size());
  if (n < 3) throw DegenerateTrack("parabola fit needs at least 3 points");
  for (std::size_t i = 1; i < track.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (track[i].t == track[j].t) throw DegenerateTrack("coincident timestamps in track");

  const double t0 = track.front().t;
  double span = 0.0;
  for (const TrackPoint& p : track) span = std::max(span, std::abs(p.t - t0));

  // Columns 1, s, s^2 with s = (t - t0) / span.
  Eigen::MatrixXd a(n, 3);
  Eigen::MatrixXd y(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const TrackPoint& p = track[static_cast<std::size_t>(i)];
    const double s = (p.t - t0) / span;
    a(i, 0) = 1.0;
    a(i, 1) = s;
    a(i, 2) = s * s;
    y(i, 0) = p.position.x;
    y(i, 1) = p.position.y;
    y(i, 2) = p.position.z;
  }
  const Eigen::MatrixXd c = a.colPivHouseholderQr().solve(y);
  const Eigen::MatrixXd r = a * c - y;

  ParabolaFit fit;
  fit.p0_est = {c(0, 0), c(0, 1), c(0, 2)};
  fit.v0_est = {c(1, 0) / span, c(1, 1) / span, c(1, 2) / span};
  fit.g_est = -2.0 * c(2, 2) / (span * span);
  fit.rms_residual = std::sqrt(r.squaredNorm() / static_cast<double>(n));
  return fit;
}

nlohmann::json AlignmentReport::to_json() const {
  nlohmann::ordered_json j;
  j["throws"] = nlohmann::ordered_json::array();
  nlohmann::ordered_json uncovered = nlohmann::ordered_json::array();
  for (const AlignmentEntry& e : throws) {
    if (e.distance_m) {
      j["throws"].push_back({{"object_id", e.object_id}, {"distance_m", *e.distance_m}});
    } else {
      uncovered.push_back(e.object_id);
    }
  }
  j["max_m"] = max_m ? nlohmann::ordered_json(*max_m) : nlohmann::ordered_json(nullptr);
  j["uncovered"] = uncovered;
  return nlohmann::json::parse(j.dump());
}

AlignmentReport check_spawn_alignment(const SessionArchive& archive) {
  AlignmentReport report;
  const auto& frames = archive.frames;
  for (const ThrowSegment& seg : segment_throws(archive)) {
    AlignmentEntry entry{seg.object_id, std::nullopt};
    const double ts = seg.release.time_s;
    if (!frames.empty() && ts >= frames.front().time_s() && ts <= frames.back().time_s()) {
      auto it = std::upper_bound(frames.begin(), frames.end(), ts,
                                 [](double t, const FrameRecord& f) { return t < f.time_s(); });
      const FrameRecord& lo = *std::prev(it);
      Vec3 ctrl = lo.controller;
      if (it != frames.end() && lo.time_s() < ts) {
        const double s = (ts - lo.time_s()) / (it->time_s() - lo.time_s());
        ctrl = lo.controller + (it->controller - lo.controller) * s;
      }
      entry.distance_m = distance(seg.release.position, ctrl);
      report.max_m = std::max(report.max_m.value_or(0.0), *entry.distance_m);
    }
    report.throws.push_back(entry);
  }
  return report;
}

std::optional<PlotKind> plot_kind_from_string(const std::string& s) {
  if (s == "throws3d") return PlotKind::Throws3d;
  if (s == "paths2d") return PlotKind::Paths2d;
  return std::nullopt;
}

namespace {

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // Empty or flat ranges get a unit pad so the mapping stays defined.
  Range padded() const {
    if (!(lo <= hi)) return {-1.0, 1.0};
    if (hi - lo < 1e-9) return {lo - 1.0, hi + 1.0};
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
  }
};

struct Panel {
  double x = 0, y = 0, w = 0, h = 0;
  Range u, v;
  std::string title, u_label, v_label;

  double px(double val) const { return x + (val - u.lo) / (u.hi - u.lo) * w; }
  double py(double val) const { return y + h - (val - v.lo) / (v.hi - v.lo) * h; }
};

std::string num(double v) {
  std::string s = fmt::format("{:.2f}", v);
  if (s == "-0.00") s.erase(0, 1);
  return s;
}

void draw_panel_frame(std::string& svg, const Panel& p) {
  svg += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444444\" "
      "stroke-width=\"1\"/>\n",
      num(p.x), num(p.y), num(p.w), num(p.h));
  svg += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
      num(p.x + p.w / 2), num(p.y - 8), p.title);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                     num(p.x + p.w / 2), num(p.y + p.h + 28), p.u_label);
  svg += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 {} {})\">{}</text>\n",
      num(p.x - 34), num(p.y + p.h / 2), num(p.x - 34), num(p.y + p.h / 2), p.v_label);
  // Extent labels at the corners.
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n", num(p.x),
                     num(p.y + p.h + 13), num(p.u.lo));
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
                     num(p.x + p.w), num(p.y + p.h + 13), num(p.u.hi));
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
                     num(p.x - 4), num(p.y + p.h), num(p.v.lo));
  svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
                     num(p.x - 4), num(p.y + 10), num(p.v.hi));
}

// Appends "M ... L ..." for a polyline in panel coordinates.
void subpath(std::string& d, const Panel& p, const std::vector<std::pair<double, double>>& pts) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!d.empty()) d += ' ';
    d += fmt::format("{}{} {}", i == 0 ? "M" : "L", num(p.px(pts[i].first)),
                     num(p.py(pts[i].second)));
  }
}

void emit_path(std::string& svg, const std::string& d, const char* color, const std::string& id) {
  if (d.empty()) return;
  svg += fmt::format(
      "<path id=\"{}\" d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", id, d,
      color);
}

void legend(std::string& svg, double x, double y,
            const std::vector<std::pair<const char*, const char*>>& entries) {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double yy = y + 18.0 * static_cast<double>(i);
    svg += fmt::format(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"3\"/>\n",
        num(x), num(yy), num(x + 24), num(yy), entries[i].second);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\">{} {}</text>\n", num(x + 30),
                       num(yy + 4), entries[i].first, entries[i].second);
  }
}

std::string header(double w, double h) {
  return fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" "
      "viewBox=\"0 0 {} {}\">\n"
      "<!-- axis convention: z-up, x/y walking plane, meters and seconds -->\n"
      "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
      w, h, w, h, w, h);
}

// Fixed isometric view: x right-down, y left-down, z up.
std::pair<double, double> iso(const Vec3& p) {
  constexpr double c30 = 0.86602540378443864676;
  return {(p.x - p.y) * c30, (p.x + p.y) * 0.5 + p.z};
}

std::string plot_throws3d(const SessionArchive& a) {
  const auto segments = segment_throws(a);
  Range t, x, y, z, iu, iv;
  auto add = [&](double time, const Vec3& p) {
    t.add(time);
    x.add(p.x);
    y.add(p.y);
    z.add(p.z);
    const auto [u, v] = iso(p);
    iu.add(u);
    iv.add(v);
  };
  for (const FrameRecord& f : a.frames) add(f.time_s(), f.controller);
  for (const ThrowSegment& s : segments)
    for (const TrackPoint& p : s.track) add(p.t, p.position);

  const double pw = 400, ph = 220;
  std::vector<Panel> panels = {
      {70, 50, pw, ph, t.padded(), x.padded(), "x vs time", "time (s)", "x (m)"},
      {560, 50, pw, ph, t.padded(), y.padded(), "y vs time", "time (s)", "y (m)"},
      {70, 340, pw, ph, t.padded(), z.padded(), "z vs time", "time (s)", "z (m)"},
      {560, 340, pw, ph, iu.padded(), iv.padded(), "isometric view", "(x - y) cos 30", "(x + y)/2 + z"},
  };

  std::string svg = header(1000, 660);
  for (const Panel& p : panels) draw_panel_frame(svg, p);

  auto draw = [&](const std::vector<TrackPoint>& pts, const char* color, const std::string& id) {
    std::string d;
    for (int axis = 0; axis < 3; ++axis) {
      std::vector<std::pair<double, double>> xy;
      for (const TrackPoint& p : pts)
        xy.emplace_back(p.t, axis == 0 ? p.position.x : axis == 1 ? p.position.y : p.position.z);
      subpath(d, panels[static_cast<std::size_t>(axis)], xy);
    }
    std::vector<std::pair<double, double>> xy;
    for (const TrackPoint& p : pts) xy.push_back(iso(p.position));
    subpath(d, panels[3], xy);
    emit_path(svg, d, color, id);
  };

  std::vector<TrackPoint> ctrl;
  for (const FrameRecord& f : a.frames) ctrl.push_back({f.time_s(), f.controller});
  draw(ctrl, kControllerColor, "controller");
  for (const ThrowSegment& s : segments) draw(s.track, kAshColor, fmt::format("ash-{}", s.object_id));

  legend(svg, 70, 615, {{"controller", kControllerColor}, {"ash", kAshColor}});
  svg += "</svg>\n";
  return svg;
}

std::string plot_paths2d(const SessionArchive& a) {
  const auto segments = segment_throws(a);
  Range x, y;
  for (const FrameRecord& f : a.frames) {
    x.add(f.participant.x);
    y.add(f.participant.y);
  }
  for (const ThrowSegment& s : segments)
    for (const TrackPoint& p : s.track) {
      x.add(p.position.x);
      y.add(p.position.y);
    }

  std::vector<std::pair<double, double>> trees;
  if (!a.frames.empty() && a.config.contains("scenario")) {
    for (const auto& t : a.config["scenario"].value("trees", nlohmann::json::array())) {
      const double tx = t.value("x", 0.0), ty = t.value("y", 0.0);
      trees.emplace_back(tx, ty);
      x.add(tx);
      y.add(ty);
    }
  }

  // Equal scale on both axes for a plan view.
  Range px = x.padded(), py = y.padded();
  const double half = std::max(px.hi - px.lo, py.hi - py.lo) / 2.0;
  const double cx = (px.lo + px.hi) / 2.0, cy = (py.lo + py.hi) / 2.0;
  const Panel panel{70, 50, 500, 500, {cx - half, cx + half}, {cy - half, cy + half},
                    "plan view", "x (m)", "y (m)"};

  std::string svg = header(640, 640);
  draw_panel_frame(svg, panel);
  for (const auto& [tx, ty] : trees)
    svg += fmt::format(
        "<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"none\" stroke=\"#8c564b\" stroke-width=\"1\"/>\n",
        num(panel.px(tx)), num(panel.py(ty)));

  std::string d;
  std::vector<std::pair<double, double>> pts;
  for (const FrameRecord& f : a.frames) pts.emplace_back(f.participant.x, f.participant.y);
  subpath(d, panel, pts);
  emit_path(svg, d, kParticipantColor, "participant");
  for (const ThrowSegment& s : segments) {
    std::string ds;
    std::vector<std::pair<double, double>> tp;
    for (const TrackPoint& p : s.track) tp.emplace_back(p.position.x, p.position.y);
    subpath(ds, panel, tp);
    emit_path(svg, ds, kAshColor, fmt::format("ash-{}", s.object_id));
  }

  legend(svg, 70, 598, {{"participant", kParticipantColor}, {"ash", kAshColor}});
  svg += "</svg>\n";
  return svg;
}

}  // namespace

std::string export_plot(const SessionArchive& archive, PlotKind kind) {
  return kind == PlotKind::Throws3d ? plot_throws3d(archive) : plot_paths2d(archive);
}

}  // namespace mexgen::analytics
