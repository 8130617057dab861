#include "mexgen/session.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mexgen/config.hpp"

namespace mexgen {

Session::Session(RunConfig config, ScenarioSpec scenario, std::string session_id,
                 std::string started_at)
    : config_(config),
      archived_config_(mexgen::archived_config(config, scenario)),
      digest_(mexgen::config_digest(archived_config_)),
      session_id_(std::move(session_id)),
      started_at_(std::move(started_at)),
      world_(world_init(config, scenario)),
      recorder_(config.world.dt) {}

std::vector<SimEvent> Session::step(const InputFrame& raw) {
  if (finalized_) return {};
  if (world_.tick == 0) recorder_.observe(world_, {});

  const InputFrame input = quantize_input(raw);
  StepResult r = world_step(world_, input, config_);
  world_ = std::move(r.state);
  inputs_.push_back({world_.tick, input});
  hashes_.push_back(state_hash(world_));
  recorder_.observe(world_, r.events);

  if (spdlog::should_log(spdlog::level::debug)) {
    const auto& p = world_.platform;
    spdlog::debug("treadmill {} {:.6f} {:.6f} {:.6f} {:.6f}", world_.tick, p.displacement.x,
                  p.displacement.y, p.last_command.vx, p.last_command.vy);
  }
  return std::move(r.events);
}

SessionArchive Session::finalize() {
  if (!finalized_ && world_.tick > 0) recorder_.finalize(world_);
  finalized_ = true;
  SessionArchive a;
  a.session_id = session_id_;
  a.started_at = started_at_;
  a.config = archived_config_;
  a.config_digest = digest_;
  a.frames = recorder_.frames();
  a.objects = recorder_.objects();
  a.inputs = inputs_;
  a.state_hashes.reserve(hashes_.size());
  for (std::uint64_t h : hashes_) a.state_hashes.push_back(hash_hex(h));
  if (!hashes_.empty()) a.final_state_hash = hash_hex(hashes_.back());
  return a;
}

std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

ReplayResult replay(const SessionArchive& archive) {
  RunConfig config;
  ScenarioSpec scenario;
  split_archived_config(archive.config, config, scenario);
  Session s(config, scenario, archive.session_id, archive.started_at);
  for (const InputRecord& r : archive.inputs) s.step(r.input);
  ReplayResult out;
  out.regenerated = s.finalize();
  out.final_state = s.world();
  out.hashes = s.hashes();
  return out;
}

namespace {

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = text.find('\n');
  if (start == std::string::npos) return out;
  ++start;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    out.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

// Walks regenerated rows against archived lines.
struct RowCursor {
  const std::vector<std::string>* archived;
  std::size_t next = 0;

  // Returns a description of the first mismatch among `fresh`, if any.
  std::optional<std::string> match(const std::vector<std::string>& fresh, const char* file) {
    for (const std::string& row : fresh) {
      if (next >= archived->size())
        return fmt::format("{}: extra row '{}'", file, row);
      if ((*archived)[next] != row)
        return fmt::format("{} row {}: archived '{}' regenerated '{}'", file, next + 1,
                           (*archived)[next], row);
      ++next;
    }
    return std::nullopt;
  }
};

}  // namespace

std::optional<ReplayDivergence> verify_replay(const std::filesystem::path& dir) {
  const SessionArchive archive = read_session(dir, ReadMode::Strict);
  const auto frames_text = read_text_file(dir / "frames.csv");
  const auto objects_text = read_text_file(dir / "objects.csv");
  if (frames_text != render_frames_csv(archive.frames))
    return ReplayDivergence{0, "frames.csv is not in canonical form"};
  if (objects_text != render_objects_csv(archive.objects))
    return ReplayDivergence{0, "objects.csv is not in canonical form"};
  const auto frame_lines = data_lines(frames_text);
  const auto object_lines = data_lines(objects_text);

  RunConfig config;
  ScenarioSpec scenario;
  split_archived_config(archive.config, config, scenario);
  Session s(config, scenario, archive.session_id, archive.started_at);

  RowCursor frames{&frame_lines};
  RowCursor objects{&object_lines};
  std::size_t seen_frames = 0;
  std::size_t seen_objects = 0;
  auto check = [&](long tick) -> std::optional<ReplayDivergence> {
    const auto& fr = s.recorder().frames();
    const auto& ob = s.recorder().objects();
    std::vector<std::string> fresh_frames;
    std::vector<std::string> fresh_objects;
    for (; seen_frames < fr.size(); ++seen_frames)
      fresh_frames.push_back(render_frame_row(fr[seen_frames]));
    for (; seen_objects < ob.size(); ++seen_objects)
      fresh_objects.push_back(render_object_row(ob[seen_objects]));
    if (auto d = frames.match(fresh_frames, "frames.csv")) return ReplayDivergence{tick, *d};
    if (auto d = objects.match(fresh_objects, "objects.csv")) return ReplayDivergence{tick, *d};
    return std::nullopt;
  };

  for (const InputRecord& r : archive.inputs) {
    s.step(r.input);
    const auto i = static_cast<std::size_t>(s.tick() - 1);
    const std::string fresh = hash_hex(s.hashes().back());
    if (i >= archive.state_hashes.size() || archive.state_hashes[i] != fresh)
      return ReplayDivergence{s.tick(), fmt::format("state hash {} != archived {}", fresh,
                                                    i < archive.state_hashes.size()
                                                        ? archive.state_hashes[i]
                                                        : std::string("(none)"))};
    if (auto d = check(s.tick())) return d;
  }
  s.finalize();
  const long last = s.tick();
  if (auto d = check(last)) return d;
  if (frames.next != frame_lines.size())
    return ReplayDivergence{last, "frames.csv has rows past the end of the replay"};
  if (objects.next != object_lines.size())
    return ReplayDivergence{last, "objects.csv has rows past the end of the replay"};
  if (archive.state_hashes.size() != archive.inputs.size())
    return ReplayDivergence{last, "hashes.csv has rows past the end of the replay"};
  const std::string fresh_hash = s.hashes().empty() ? "" : hash_hex(s.hashes().back());
  if (fresh_hash != archive.final_state_hash)
    return ReplayDivergence{last, fmt::format("final state hash {} != archived {}", fresh_hash,
                                              archive.final_state_hash)};
  return std::nullopt;
}

}  // namespace mexgen
