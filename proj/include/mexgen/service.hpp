#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mexgen/session.hpp"
#include "mexgen/world.hpp"

namespace mexgen::service {

struct ServiceConfig {
  RunConfig run;
  ScenarioSpec scenario;
  std::filesystem::path record_dir = "sessions";  // archives go to record_dir/<session_id>
  unsigned short port = 8080;
  double broadcast_rate = 20.0;  // Hz
  bool headless_speed = false;   // tick as fast as possible instead of real time
  std::optional<std::filesystem::path> ui_dir;
};

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct ClientInput {
  long seq = 0;
  InputFrame frame;  // controller pose and trigger included
};

// Validates an {"type":"input"} message. Exactly one of "direct"/"trackers"
// must be present and must match "mode".
ClientInput parse_client_input(const nlohmann::json& msg);

// Sample-and-hold input stage between the socket and the tick loop.
class InputIngest {
 public:
  explicit InputIngest(double v_max) : v_max_(v_max) {}

  // Drops messages whose seq does not exceed every seq seen so far.
  bool offer(const ClientInput& in);

  // Input for the next tick: the newest pending message, else the held one.
  InputFrame next_frame();

  long dropped() const { return dropped_; }
  bool received_any() const { return last_seq_.has_value(); }

 private:
  double v_max_;
  std::optional<long> last_seq_;
  std::optional<ClientInput> pending_;
  InputFrame held_;
  long dropped_ = 0;
};

// Ticks between state broadcasts: ceil(tick_rate / broadcast_rate).
long broadcast_interval(double dt, double broadcast_rate);

nlohmann::json event_message(const SimEvent& e);
nlohmann::json state_message(const WorldState& w, const RunConfig& config,
                             const std::vector<SimEvent>& recent);
nlohmann::json error_message(std::string_view code, std::string_view message);

struct Outgoing {
  enum class Kind { Reply, Event, State };
  Kind kind = Kind::Reply;
  std::string text;
  bool close_after = false;
};

// Transport-free session protocol. Owned by the single authoritative loop:
// inbound text frames are handed to handle(), the loop calls tick().
class SessionHost {
 public:
  SessionHost(const ServiceConfig& config, std::string session_id, std::string started_at);

  std::vector<Outgoing> handle(std::string_view text);
  std::vector<Outgoing> tick();

  bool greeted() const { return greeted_; }
  bool running() const { return running_; }
  bool ended() const { return ended_; }
  long dropped_inputs() const { return ingest_.dropped(); }
  const Session& session() const { return session_; }
  long interval() const { return interval_; }

  // Finalizes the archive and writes it under record_dir/<session_id>.
  // Returns the archive directory.
  std::filesystem::path finish();

 private:
  const ServiceConfig& config_;
  Session session_;
  InputIngest ingest_;
  long interval_;
  bool greeted_ = false;
  bool running_ = false;
  bool ended_ = false;
  bool finished_ = false;
  std::vector<SimEvent> recent_;
  std::filesystem::path archive_dir_;
};

std::string new_session_id();

// WebSocket front end: endpoint /session, plus static files from ui_dir.
class Server {
 public:
  explicit Server(ServiceConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts accepting in the background. Returns the bound port
  // (useful with port 0).
  unsigned short start();
  void stop();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();

  // Directories of archives written so far.
  std::vector<std::filesystem::path> archives() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mexgen::service
