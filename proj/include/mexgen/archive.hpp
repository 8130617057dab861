#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mexgen/recorder.hpp"
#include "mexgen/world.hpp"

namespace mexgen {

inline constexpr std::string_view kFramesHeader =
    "time_s,participant_x,participant_y,participant_z,controller_x,controller_y,controller_z,"
    "trigger_pressed";
inline constexpr std::string_view kObjectsHeader = "object_id,time_s,x,y,z,event";
inline constexpr std::string_view kInputsHeader =
    "tick,mode,move_x,move_y,yaw,left_h,right_h,ctrl_x,ctrl_y,ctrl_z,trigger";
inline constexpr std::string_view kHashesHeader = "tick,state_hash";

// Input applied on the step that produced `tick` (ticks start at 1).
struct InputRecord {
  long tick = 0;
  InputFrame input;

  friend bool operator==(const InputRecord&, const InputRecord&) = default;
};

struct SessionArchive {
  std::string session_id;
  std::string started_at;  // RFC 3339, UTC
  nlohmann::json config;   // run config with the scenario embedded
  std::string config_digest;
  std::vector<FrameRecord> frames;
  std::vector<ObjectRecord> objects;
  std::vector<InputRecord> inputs;
  std::vector<std::string> state_hashes;  // hex state hash after each tick, 1..N
  std::string final_state_hash;  // hex, empty for sessions that never ticked

  long tick_count() const { return static_cast<long>(inputs.size()); }
  friend bool operator==(const SessionArchive&, const SessionArchive&) = default;
};

class ValidationError : public std::runtime_error {
 public:
  enum class Kind {
    MissingFile,
    MissingColumn,
    Parse,
    CadenceViolation,
    LifecycleOrder,
    BadDigest,
    CountMismatch,
    BadMeta,
  };

  // `where` is a 1-based data row number, or an object id for LifecycleOrder.
  ValidationError(Kind kind, std::string file, long where, const std::string& detail);

  Kind kind() const { return kind_; }
  const std::string& file() const { return file_; }
  long where() const { return where_; }

 private:
  Kind kind_;
  std::string file_;
  long where_;
};

const char* to_string(ValidationError::Kind kind);

// Fixed-point renderings used by every CSV (6 decimals, negative zero folded).
std::string format_coord(double v);
std::string format_tenths(long tenths);

std::string render_frame_row(const FrameRecord& f);
std::string render_object_row(const ObjectRecord& o);
std::string render_input_row(const InputRecord& r);

std::string render_frames_csv(const std::vector<FrameRecord>& frames);
std::string render_objects_csv(const std::vector<ObjectRecord>& objects);
std::string render_inputs_csv(const std::vector<InputRecord>& inputs);
std::string render_hashes_csv(const std::vector<std::string>& hashes);
std::string render_meta_json(const SessionArchive& archive);

// Snaps every field to what inputs.csv can represent, so a logged input replays bit-exactly.
InputFrame quantize_input(const InputFrame& in);

// Parses inputs.csv text. With `dense` the ticks must run 1, 2, ..., N; otherwise
// they need only strictly increase (script files).
std::vector<InputRecord> parse_inputs_csv(const std::string& text, const std::string& file_name,
                                          bool dense);

// Expands a sparse script into one input per tick with sample-and-hold.
std::vector<InputRecord> expand_script(const std::vector<InputRecord>& rows);

// Writes frames.csv, objects.csv, inputs.csv, hashes.csv, config.json and meta.json into a
// sibling temp directory, then renames it over `dir`.
void write_session(const SessionArchive& archive, const std::filesystem::path& dir);

enum class ReadMode {
  Strict,   // all invariants: cadence, lifecycle, counts
  Lenient,  // structure, parse and digest only
};

SessionArchive read_session(const std::filesystem::path& dir, ReadMode mode = ReadMode::Strict);

// Invariant checks shared by read_session and the validate command.
void check_cadence(const std::vector<FrameRecord>& frames);
void check_lifecycle(const std::vector<ObjectRecord>& objects);

std::string read_text_file(const std::filesystem::path& path);
std::string current_rfc3339();

}  // namespace mexgen
