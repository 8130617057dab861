#include "mexgen/archive.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include <fmt/format.h>

#include "mexgen/config.hpp"

namespace mexgen {

namespace fs = std::filesystem;
using nlohmann::json;
using Kind = ValidationError::Kind;

ValidationError::ValidationError(Kind kind, std::string file, long where, const std::string& detail)
    : std::runtime_error(fmt::format("{}({}) in {}: {}", to_string(kind), where, file, detail)),
      kind_(kind),
      file_(std::move(file)),
      where_(where) {}

const char* to_string(ValidationError::Kind kind) {
  switch (kind) {
    case Kind::MissingFile: return "MissingFile";
    case Kind::MissingColumn: return "MissingColumn";
    case Kind::Parse: return "ParseError";
    case Kind::CadenceViolation: return "CadenceViolation";
    case Kind::LifecycleOrder: return "LifecycleOrder";
    case Kind::BadDigest: return "BadDigest";
    case Kind::CountMismatch: return "CountMismatch";
    case Kind::BadMeta: return "BadMeta";
  }
  return "ValidationError";
}

std::string format_coord(double v) {
  std::string s = fmt::format("{:.6f}", v);
  if (s == "-0.000000") s.erase(0, 1);
  return s;
}

std::string format_tenths(long tenths) {
  const char* sign = tenths < 0 ? "-" : "";
  const long a = tenths < 0 ? -tenths : tenths;
  return fmt::format("{}{}.{}", sign, a / 10, a % 10);
}

std::string render_frame_row(const FrameRecord& f) {
  return fmt::format("{},{},{},{},{},{},{},{}", format_tenths(f.time_tenths),
                     format_coord(f.participant.x), format_coord(f.participant.y),
                     format_coord(f.participant.z), format_coord(f.controller.x),
                     format_coord(f.controller.y), format_coord(f.controller.z),
                     f.trigger_pressed ? 1 : 0);
}

std::string render_object_row(const ObjectRecord& o) {
  return fmt::format("{},{},{},{},{},{}", o.object_id, format_coord(o.time_s),
                     format_coord(o.position.x), format_coord(o.position.y),
                     format_coord(o.position.z), to_string(o.event));
}

std::string render_input_row(const InputRecord& r) {
  const InputFrame& in = r.input;
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{}", r.tick,
                     in.mode == InputMode::Direct ? "direct" : "trackers", format_coord(in.move_x),
                     format_coord(in.move_y), format_coord(in.yaw), format_coord(in.left_h),
                     format_coord(in.right_h), format_coord(in.controller.x),
                     format_coord(in.controller.y), format_coord(in.controller.z),
                     in.trigger ? 1 : 0);
}

namespace {

template <class T, class F>
std::string render_csv(std::string_view header, const std::vector<T>& rows, F&& row) {
  std::string out(header);
  out += '\n';
  for (const T& r : rows) {
    out += row(r);
    out += '\n';
  }
  return out;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = pos + 1;
  }
  return out;
}

class Table {
 public:
  Table(std::string file, std::string_view text, std::string_view header)
      : file_(std::move(file)), lines_(lines_of(text)) {
    if (lines_.empty() || lines_[0] != header) {
      const auto got = lines_.empty() ? std::vector<std::string_view>{} : split(lines_[0], ',');
      for (std::string_view col : split(header, ',')) {
        if (std::find(got.begin(), got.end(), col) == got.end())
          throw ValidationError(Kind::MissingColumn, file_, 0, "missing column " + std::string(col));
      }
      throw ValidationError(Kind::MissingColumn, file_, 0, "header mismatch");
    }
    width_ = split(header, ',').size();
  }

  std::size_t rows() const { return lines_.size() - 1; }

  // 1-based data row.
  std::vector<std::string_view> row(std::size_t r) const {
    auto cells = split(lines_[r], ',');
    if (cells.size() != width_)
      throw ValidationError(Kind::Parse, file_, static_cast<long>(r),
                            fmt::format("expected {} fields, got {}", width_, cells.size()));
    return cells;
  }

  double real(std::string_view cell, std::size_t r) const {
    double v = 0.0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || p != cell.data() + cell.size() || cell.empty())
      throw ValidationError(Kind::Parse, file_, static_cast<long>(r),
                            "bad number '" + std::string(cell) + "'");
    return v;
  }

  long integer(std::string_view cell, std::size_t r) const {
    long v = 0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || p != cell.data() + cell.size() || cell.empty())
      throw ValidationError(Kind::Parse, file_, static_cast<long>(r),
                            "bad integer '" + std::string(cell) + "'");
    return v;
  }

  bool flag(std::string_view cell, std::size_t r) const {
    if (cell == "0") return false;
    if (cell == "1") return true;
    throw ValidationError(Kind::Parse, file_, static_cast<long>(r),
                          "expected 0 or 1, got '" + std::string(cell) + "'");
  }

  // "<int>.<digit>" -> tenths
  long tenths(std::string_view cell, std::size_t r) const {
    const auto dot = cell.find('.');
    if (dot == std::string_view::npos || dot + 2 != cell.size() || dot == 0 ||
        cell.back() < '0' || cell.back() > '9')
      throw ValidationError(Kind::Parse, file_, static_cast<long>(r),
                            "time must have one decimal: '" + std::string(cell) + "'");
    const long whole = integer(cell.substr(0, dot), r);
    if (whole < 0)
      throw ValidationError(Kind::Parse, file_, static_cast<long>(r), "negative time");
    return whole * 10 + (cell.back() - '0');
  }

  const std::string& file() const { return file_; }

 private:
  std::string file_;
  std::vector<std::string_view> lines_;
  std::size_t width_ = 0;
};

std::vector<FrameRecord> parse_frames(const std::string& text) {
  Table t("frames.csv", text, kFramesHeader);
  std::vector<FrameRecord> out;
  for (std::size_t r = 1; r <= t.rows(); ++r) {
    const auto c = t.row(r);
    out.push_back({t.tenths(c[0], r),
                   {t.real(c[1], r), t.real(c[2], r), t.real(c[3], r)},
                   {t.real(c[4], r), t.real(c[5], r), t.real(c[6], r)},
                   t.flag(c[7], r)});
  }
  return out;
}

std::vector<ObjectRecord> parse_objects(const std::string& text) {
  Table t("objects.csv", text, kObjectsHeader);
  std::vector<ObjectRecord> out;
  for (std::size_t r = 1; r <= t.rows(); ++r) {
    const auto c = t.row(r);
    const auto ev = object_event_from_string(c[5]);
    if (!ev)
      throw ValidationError(Kind::Parse, t.file(), static_cast<long>(r),
                            "unknown event '" + std::string(c[5]) + "'");
    out.push_back({t.integer(c[0], r), t.real(c[1], r),
                   {t.real(c[2], r), t.real(c[3], r), t.real(c[4], r)}, *ev});
  }
  return out;
}

std::vector<std::string> parse_hashes(const std::string& text) {
  Table t("hashes.csv", text, kHashesHeader);
  std::vector<std::string> out;
  for (std::size_t r = 1; r <= t.rows(); ++r) {
    const auto c = t.row(r);
    if (t.integer(c[0], r) != static_cast<long>(r))
      throw ValidationError(Kind::Parse, t.file(), static_cast<long>(r), "tick out of sequence");
    if (c[1].size() != 16 || c[1].find_first_not_of("0123456789abcdef") != std::string_view::npos)
      throw ValidationError(Kind::Parse, t.file(), static_cast<long>(r), "bad hash");
    out.emplace_back(c[1]);
  }
  return out;
}

}  // namespace

std::string render_frames_csv(const std::vector<FrameRecord>& frames) {
  return render_csv(kFramesHeader, frames, render_frame_row);
}

std::string render_objects_csv(const std::vector<ObjectRecord>& objects) {
  return render_csv(kObjectsHeader, objects, render_object_row);
}

std::string render_inputs_csv(const std::vector<InputRecord>& inputs) {
  return render_csv(kInputsHeader, inputs, render_input_row);
}

std::string render_hashes_csv(const std::vector<std::string>& hashes) {
  std::string out(kHashesHeader);
  out += '\n';
  for (std::size_t i = 0; i < hashes.size(); ++i) out += fmt::format("{},{}\n", i + 1, hashes[i]);
  return out;
}

std::string render_meta_json(const SessionArchive& a) {
  nlohmann::ordered_json meta;
  meta["session_id"] = a.session_id;
  meta["started_at"] = a.started_at;
  meta["config_digest"] = a.config_digest;
  meta["frame_count"] = a.frames.size();
  meta["tick_count"] = a.inputs.size();
  meta["axis_convention"] = "z-up";
  meta["input_log"] = "inputs.csv";
  meta["state_hash_log"] = "hashes.csv";
  meta["final_state_hash"] = a.final_state_hash;
  return meta.dump(2) + "\n";
}

InputFrame quantize_input(const InputFrame& in) {
  auto q = [](double v) {
    const std::string s = format_coord(v);
    double out = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), out);
    return out;
  };
  InputFrame o = in;
  o.move_x = q(in.move_x);
  o.move_y = q(in.move_y);
  o.yaw = q(in.yaw);
  o.left_h = q(in.left_h);
  o.right_h = q(in.right_h);
  o.controller = {q(in.controller.x), q(in.controller.y), q(in.controller.z)};
  return o;
}

std::vector<InputRecord> parse_inputs_csv(const std::string& text, const std::string& file_name,
                                          bool dense) {
  Table t(file_name, text, kInputsHeader);
  std::vector<InputRecord> out;
  long prev = 0;
  for (std::size_t r = 1; r <= t.rows(); ++r) {
    const auto c = t.row(r);
    InputRecord rec;
    rec.tick = t.integer(c[0], r);
    if (dense ? rec.tick != prev + 1 : rec.tick <= prev)
      throw ValidationError(Kind::Parse, file_name, static_cast<long>(r),
                            fmt::format("tick {} out of sequence after {}", rec.tick, prev));
    prev = rec.tick;
    if (c[1] == "direct") {
      rec.input.mode = InputMode::Direct;
    } else if (c[1] == "trackers") {
      rec.input.mode = InputMode::Trackers;
    } else {
      throw ValidationError(Kind::Parse, file_name, static_cast<long>(r),
                            "mode must be direct or trackers");
    }
    rec.input.move_x = t.real(c[2], r);
    rec.input.move_y = t.real(c[3], r);
    rec.input.yaw = t.real(c[4], r);
    rec.input.left_h = t.real(c[5], r);
    rec.input.right_h = t.real(c[6], r);
    rec.input.controller = {t.real(c[7], r), t.real(c[8], r), t.real(c[9], r)};
    rec.input.trigger = t.flag(c[10], r);
    out.push_back(rec);
  }
  return out;
}

std::vector<InputRecord> expand_script(const std::vector<InputRecord>& rows) {
  std::vector<InputRecord> out;
  if (rows.empty()) return out;
  out.reserve(static_cast<std::size_t>(rows.back().tick));
  InputFrame held;
  std::size_t next = 0;
  for (long tick = 1; tick <= rows.back().tick; ++tick) {
    if (next < rows.size() && rows[next].tick == tick) held = rows[next++].input;
    out.push_back({tick, held});
  }
  return out;
}

void check_cadence(const std::vector<FrameRecord>& frames) {
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].time_tenths != static_cast<long>(i))
      throw ValidationError(Kind::CadenceViolation, "frames.csv", static_cast<long>(i + 1),
                            fmt::format("expected time {}, got {}",
                                        format_tenths(static_cast<long>(i)),
                                        format_tenths(frames[i].time_tenths)));
  }
}

void check_lifecycle(const std::vector<ObjectRecord>& objects) {
  struct Track {
    bool spawned = false;
    bool despawned = false;
    double last_t = 0.0;
  };
  std::map<long, Track> tracks;
  for (const ObjectRecord& o : objects) {
    Track& tr = tracks[o.object_id];
    auto fail = [&](const std::string& why) {
      throw ValidationError(Kind::LifecycleOrder, "objects.csv", o.object_id, why);
    };
    if (tr.despawned) fail("row after despawn");
    if (o.event == ObjectEvent::Spawn) {
      if (tr.spawned) fail("second spawn");
      tr.spawned = true;
    } else {
      if (!tr.spawned) fail(std::string(to_string(o.event)) + " before spawn");
      if (o.time_s < tr.last_t) fail("time goes backwards");
      if (o.event == ObjectEvent::Despawn) tr.despawned = true;
    }
    tr.last_t = o.time_s;
  }
  for (const auto& [id, tr] : tracks)
    if (!tr.despawned) throw ValidationError(Kind::LifecycleOrder, "objects.csv", id, "no despawn");
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(Kind::MissingFile, path.filename().string(), 0, "cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string current_rfc3339() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw std::runtime_error("short write to " + path.string());
}

}  // namespace

void write_session(const SessionArchive& archive, const fs::path& dir) {
  const fs::path target = fs::absolute(dir).lexically_normal();
  const fs::path parent = target.parent_path();
  fs::create_directories(parent);

  static int counter = 0;
  const std::string stem = target.filename().string();
  const fs::path tmp = parent / fmt::format(".{}.tmp-{}-{}", stem, ::getpid(), counter++);
  const fs::path old = parent / fmt::format(".{}.old-{}-{}", stem, ::getpid(), counter++);

  try {
    fs::create_directory(tmp);
    write_file(tmp / "frames.csv", render_frames_csv(archive.frames));
    write_file(tmp / "objects.csv", render_objects_csv(archive.objects));
    write_file(tmp / "inputs.csv", render_inputs_csv(archive.inputs));
    write_file(tmp / "hashes.csv", render_hashes_csv(archive.state_hashes));
    write_file(tmp / "config.json", archive.config.dump(2) + "\n");
    write_file(tmp / "meta.json", render_meta_json(archive));
    if (fs::exists(target)) {
      fs::rename(target, old);
      fs::rename(tmp, target);
      fs::remove_all(old);
    } else {
      fs::rename(tmp, target);
    }
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    if (fs::exists(old, ec) && !fs::exists(target, ec)) fs::rename(old, target, ec);
    throw;
  }
}

SessionArchive read_session(const fs::path& dir, ReadMode mode) {
  for (const char* name : {"frames.csv", "objects.csv", "inputs.csv", "hashes.csv", "config.json",
                           "meta.json"})
    if (!fs::is_regular_file(dir / name))
      throw ValidationError(Kind::MissingFile, name, 0, "not found in " + dir.string());

  SessionArchive a;
  json meta;
  try {
    meta = json::parse(read_text_file(dir / "meta.json"));
  } catch (const json::parse_error& e) {
    throw ValidationError(Kind::BadMeta, "meta.json", 0, e.what());
  }
  auto need = [&](const char* key, auto pred) -> const json& {
    auto it = meta.find(key);
    if (it == meta.end() || !pred(*it))
      throw ValidationError(Kind::BadMeta, "meta.json", 0, std::string("missing or bad ") + key);
    return *it;
  };
  auto is_str = [](const json& j) { return j.is_string(); };
  auto is_uint = [](const json& j) { return j.is_number_unsigned(); };
  if (!meta.is_object()) throw ValidationError(Kind::BadMeta, "meta.json", 0, "not an object");
  a.session_id = need("session_id", is_str).get<std::string>();
  a.started_at = need("started_at", is_str).get<std::string>();
  a.config_digest = need("config_digest", is_str).get<std::string>();
  const auto frame_count = need("frame_count", is_uint).get<std::size_t>();
  const auto tick_count = need("tick_count", is_uint).get<std::size_t>();
  if (need("axis_convention", is_str).get<std::string>() != "z-up")
    throw ValidationError(Kind::BadMeta, "meta.json", 0, "axis_convention must be z-up");
  if (auto it = meta.find("final_state_hash"); it != meta.end()) {
    if (!it->is_string()) throw ValidationError(Kind::BadMeta, "meta.json", 0, "bad final_state_hash");
    a.final_state_hash = it->get<std::string>();
  }

  try {
    a.config = json::parse(read_text_file(dir / "config.json"));
    RunConfig rc;
    ScenarioSpec sc;
    split_archived_config(a.config, rc, sc);
  } catch (const json::parse_error& e) {
    throw ValidationError(Kind::Parse, "config.json", 0, e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(Kind::Parse, "config.json", 0, e.what());
  }
  if (config_digest(a.config) != a.config_digest)
    throw ValidationError(Kind::BadDigest, "meta.json", 0, "config_digest does not match config.json");

  a.frames = parse_frames(read_text_file(dir / "frames.csv"));
  a.objects = parse_objects(read_text_file(dir / "objects.csv"));
  a.inputs = parse_inputs_csv(read_text_file(dir / "inputs.csv"), "inputs.csv", true);
  a.state_hashes = parse_hashes(read_text_file(dir / "hashes.csv"));

  if (mode == ReadMode::Strict) {
    check_cadence(a.frames);
    check_lifecycle(a.objects);
    if (a.frames.size() != frame_count)
      throw ValidationError(Kind::CountMismatch, "frames.csv", static_cast<long>(a.frames.size()),
                            fmt::format("meta.json frame_count is {}", frame_count));
    if (a.inputs.size() != tick_count)
      throw ValidationError(Kind::CountMismatch, "inputs.csv", static_cast<long>(a.inputs.size()),
                            fmt::format("meta.json tick_count is {}", tick_count));
    if (a.state_hashes.size() != tick_count)
      throw ValidationError(Kind::CountMismatch, "hashes.csv",
                            static_cast<long>(a.state_hashes.size()),
                            fmt::format("meta.json tick_count is {}", tick_count));
  }
  return a;
}

}  // namespace mexgen
