#include <cmath>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mexgen/config.hpp"
#include "mexgen/service.hpp"

namespace mexgen::service {

using nlohmann::json;

namespace {

double number(const json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number())
    throw ProtocolError("malformed", fmt::format("{}.{} must be a number", where, key));
  return it->get<double>();
}

const json* object_field(const json& msg, const char* key) {
  auto it = msg.find(key);
  if (it == msg.end() || it->is_null()) return nullptr;
  if (!it->is_object()) throw ProtocolError("malformed", fmt::format("{} must be an object", key));
  return &*it;
}

}  // namespace

ClientInput parse_client_input(const json& msg) {
  ClientInput in;
  auto seq = msg.find("seq");
  if (seq == msg.end() || !seq->is_number_integer())
    throw ProtocolError("malformed", "input.seq must be an integer");
  in.seq = seq->get<long>();

  auto mode = msg.find("mode");
  if (mode == msg.end() || !mode->is_string())
    throw ProtocolError("malformed", "input.mode must be \"direct\" or \"trackers\"");
  const json* direct = object_field(msg, "direct");
  const json* trackers = object_field(msg, "trackers");
  const json* controller = object_field(msg, "controller");

  InputFrame& f = in.frame;
  if (*mode == "direct") {
    if (!direct || trackers)
      throw ProtocolError("malformed", "direct mode requires exactly the \"direct\" block");
    f.mode = InputMode::Direct;
    f.move_x = number(*direct, "move_x", "direct");
    f.move_y = number(*direct, "move_y", "direct");
    f.yaw = direct->contains("yaw") ? number(*direct, "yaw", "direct") : 0.0;
  } else if (*mode == "trackers") {
    if (!trackers || direct)
      throw ProtocolError("malformed", "trackers mode requires exactly the \"trackers\" block");
    f.mode = InputMode::Trackers;
    f.left_h = number(*trackers, "left_h", "trackers");
    f.right_h = number(*trackers, "right_h", "trackers");
    f.yaw = number(*trackers, "yaw", "trackers");
    if (!controller && trackers->contains("x")) controller = trackers;
  } else {
    throw ProtocolError("malformed", "input.mode must be \"direct\" or \"trackers\"");
  }

  if (!controller) throw ProtocolError("malformed", "input.controller {x,y,z} is required");
  f.controller = {number(*controller, "x", "controller"), number(*controller, "y", "controller"),
                  number(*controller, "z", "controller")};

  auto trig = msg.find("trigger");
  if (trig == msg.end() || !trig->is_boolean())
    throw ProtocolError("malformed", "input.trigger must be a boolean");
  f.trigger = trig->get<bool>();
  return in;
}

bool InputIngest::offer(const ClientInput& in) {
  if (last_seq_ && in.seq <= *last_seq_) {
    ++dropped_;
    return false;
  }
  last_seq_ = in.seq;
  pending_ = in;
  return true;
}

InputFrame InputIngest::next_frame() {
  if (pending_) {
    held_ = pending_->frame;
    if (held_.mode == InputMode::Direct) {
      const Vec2 m = clamp_norm({held_.move_x, held_.move_y}, v_max_);
      held_.move_x = m.x;
      held_.move_y = m.y;
    }
    pending_.reset();
  }
  return held_;
}

long broadcast_interval(double dt, double broadcast_rate) {
  const double ratio = (1.0 / dt) / broadcast_rate;
  return std::max(1L, static_cast<long>(std::ceil(ratio - 1e-9)));
}

json event_message(const SimEvent& e) {
  json j = {{"type", "event"},
            {"tick", e.tick},
            {"time_s", e.time_s},
            {"kind", to_string(e.kind)},
            {"position", {{"x", e.position.x}, {"y", e.position.y}, {"z", e.position.z}}}};
  if (e.projectile_id) j["projectile_id"] = *e.projectile_id;
  if (e.tree_id) j["tree_id"] = *e.tree_id;
  return j;
}

json state_message(const WorldState& w, const RunConfig& config,
                   const std::vector<SimEvent>& recent) {
  json trees = json::array();
  for (const Tree& t : w.trees)
    trees.push_back({{"id", t.id},
                     {"stage", t.bloom_stage},
                     {"visual_stage", discrete_stage(t.bloom_stage, config.world.stage_count)},
                     {"x", t.canopy_center.x},
                     {"y", t.canopy_center.y}});
  json projectiles = json::array();
  for (const auto& p : w.projectiles)
    if (p.state == interaction::ProjectileState::InFlight)
      projectiles.push_back(
          {{"id", p.id}, {"x", p.position.x}, {"y", p.position.y}, {"z", p.position.z}});
  json events = json::array();
  for (const SimEvent& e : recent) {
    json ej = event_message(e);
    ej.erase("type");
    events.push_back(std::move(ej));
  }
  const auto& pv = w.participant.virtual_position;
  return {{"type", "state"},
          {"tick", w.tick},
          {"time_s", w.time_s},
          {"participant",
           {{"x", pv.x}, {"y", pv.y}, {"z", pv.z}, {"yaw", w.participant.heading_yaw}}},
          {"controller",
           {{"x", w.controller.position.x},
            {"y", w.controller.position.y},
            {"z", w.controller.position.z},
            {"trigger", w.controller.trigger_pressed}}},
          {"platform",
           {{"dx", w.platform.displacement.x},
            {"dy", w.platform.displacement.y},
            {"vx", w.platform.last_command.vx},
            {"vy", w.platform.last_command.vy},
            {"v_max", config.treadmill.v_max},
            {"belt", treadmill::belt_index(w.platform.displacement, config.treadmill)}}},
          {"trees", trees},
          {"projectiles", projectiles},
          {"events", events}};
}

json error_message(std::string_view code, std::string_view message) {
  return {{"type", "error"}, {"code", code}, {"message", message}};
}

SessionHost::SessionHost(const ServiceConfig& config, std::string session_id,
                         std::string started_at)
    : config_(config),
      session_(config.run, config.scenario, std::move(session_id), std::move(started_at)),
      ingest_(config.run.treadmill.v_max),
      interval_(broadcast_interval(config.run.world.dt, config.broadcast_rate)) {}

std::vector<Outgoing> SessionHost::handle(std::string_view text) {
  using K = Outgoing::Kind;
  std::vector<Outgoing> out;
  if (ended_) return out;

  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error&) {
    if (!greeted_) {
      out.push_back({K::Reply, error_message("bad_hello", "expected a hello message").dump(), true});
      ended_ = true;
    } else {
      out.push_back({K::Reply, error_message("malformed", "message is not valid JSON").dump()});
    }
    return out;
  }
  const std::string type = msg.is_object() && msg.contains("type") && msg["type"].is_string()
                               ? msg["type"].get<std::string>()
                               : std::string();

  if (!greeted_) {
    if (type != "hello") {
      out.push_back({K::Reply, error_message("bad_hello", "expected a hello message").dump(), true});
      ended_ = true;
      return out;
    }
    greeted_ = true;
    json welcome = {{"type", "welcome"},
                    {"session_id", session_.session_id()},
                    {"config_digest", session_.config_digest()},
                    {"config", archived_config(config_.run, config_.scenario)},
                    {"tick_rate", 1.0 / config_.run.world.dt},
                    {"broadcast_rate", config_.broadcast_rate},
                    {"axis_convention", "z-up"}};
    out.push_back({K::Reply, welcome.dump()});
    return out;
  }

  if (type == "start") {
    running_ = true;
  } else if (type == "input") {
    try {
      if (!ingest_.offer(parse_client_input(msg)))
        spdlog::debug("dropped out-of-order input seq {}", msg.value("seq", -1L));
      running_ = true;
    } catch (const ProtocolError& e) {
      out.push_back({K::Reply, error_message(e.code(), e.what()).dump()});
    }
  } else if (type == "bye") {
    ended_ = true;
    out.push_back({K::Reply, json{{"type", "bye"}, {"session_id", session_.session_id()}}.dump(),
                   true});
  } else if (type == "hello") {
    out.push_back({K::Reply, error_message("already_greeted", "hello already received").dump()});
  } else {
    out.push_back({K::Reply, error_message("unknown_type", "unknown message type").dump()});
  }
  return out;
}

std::vector<Outgoing> SessionHost::tick() {
  std::vector<Outgoing> out;
  if (!running_ || ended_) return out;
  const auto events = session_.step(ingest_.next_frame());
  for (const SimEvent& e : events) {
    out.push_back({Outgoing::Kind::Event, event_message(e).dump()});
    recent_.push_back(e);
  }
  if (session_.tick() % interval_ == 0) {
    out.push_back(
        {Outgoing::Kind::State, state_message(session_.world(), config_.run, recent_).dump()});
    recent_.clear();
  }
  return out;
}

std::filesystem::path SessionHost::finish() {
  if (finished_) return archive_dir_;
  finished_ = true;
  ended_ = true;
  // Session::finalize is idempotent, so this is safe even if the caller stepped past end.
  const SessionArchive archive = session_.finalize();
  archive_dir_ = config_.record_dir / session_.session_id();
  write_session(archive, archive_dir_);
  spdlog::info("session {} archived to {} ({} ticks, {} frames)", session_.session_id(),
               archive_dir_.string(), archive.tick_count(), archive.frames.size());
  return archive_dir_;
}

std::string new_session_id() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  std::string stamp = current_rfc3339();
  std::erase(stamp, '-');
  std::erase(stamp, ':');
  return fmt::format("session-{}-{:04x}{:02x}", stamp, rd() & 0xffff, counter++ & 0xff);
}

}  // namespace mexgen::service
