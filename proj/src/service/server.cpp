#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <list>
#include <mutex>
#include <sstream>
#include <thread>

#include <sys/socket.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "mexgen/service.hpp"

namespace mexgen::service {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

std::string mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

// One accepted TCP connection, serviced on its own thread and io_context.
class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(const ServiceConfig& config, std::atomic<bool>& busy,
             std::function<void(std::filesystem::path)> on_archive)
      : config_(config), busy_(busy), on_archive_(std::move(on_archive)), socket_(ioc_) {}

  tcp::socket& socket() { return socket_; }
  net::io_context& ioc() { return ioc_; }

  void run() {
    fd_ = socket_.native_handle();
    try {
      beast::flat_buffer buffer;
      http::request<http::string_body> req;
      http::read(socket_, buffer, req);
      if (websocket::is_upgrade(req)) {
        if (req.target() != "/session") {
          reply_status(req, http::status::not_found, "unknown endpoint");
          return;
        }
        serve_websocket(req);
      } else {
        serve_file(req);
      }
    } catch (const std::exception& e) {
      spdlog::debug("connection ended: {}", e.what());
    }
  }

  // Called from the server thread during shutdown.
  void abort() {
    // shutdown(2) wakes any blocking or pending read on the socket.
    if (const int fd = fd_.load(); fd >= 0) ::shutdown(fd, SHUT_RDWR);
    {
      std::lock_guard lock(in_mu_);
      peer_closed_ = true;
    }
    in_cv_.notify_all();
  }

 private:
  void reply_status(const http::request<http::string_body>& req, http::status status,
                    const std::string& body) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, "text/plain");
    res.keep_alive(false);
    res.body() = body;
    res.prepare_payload();
    http::write(socket_, res);
  }

  void serve_file(const http::request<http::string_body>& req) {
    if (!config_.ui_dir || req.method() != http::verb::get) {
      reply_status(req, http::status::not_found, "not found");
      return;
    }
    std::string target(req.target());
    if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (target.empty() || target == "/") target = "/index.html";
    if (target.find("..") != std::string::npos) {
      reply_status(req, http::status::bad_request, "bad path");
      return;
    }
    const std::filesystem::path path = *config_.ui_dir / target.substr(1);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      reply_status(req, http::status::not_found, "not found");
      return;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    http::response<http::string_body> res{http::status::ok, req.version()};
    res.set(http::field::content_type, mime_type(path));
    res.keep_alive(false);
    res.body() = ss.str();
    res.prepare_payload();
    http::write(socket_, res);
  }

  void serve_websocket(const http::request<http::string_body>& req) {
    ws_.emplace(std::move(socket_));
    ws_->accept(req);
    ws_->text(true);
    if (busy_.exchange(true)) {
      ws_->write(net::buffer(error_message("busy", "a session is already running").dump()));
      ws_->close(websocket::close_code::try_again_later);
      return;
    }
    try {
      run_session();
    } catch (...) {
      busy_ = false;
      throw;
    }
    busy_ = false;
  }

  void run_session() {
    SessionHost host(config_, new_session_id(), current_rfc3339());
    auto guard = net::make_work_guard(ioc_);
    start_read();

    std::thread loop([&] {
      try {
        tick_loop(host);
      } catch (const std::exception& e) {
        spdlog::error("session loop failed: {}", e.what());
      }
      net::post(ioc_, [&] {
        close_requested_ = true;
        if (!writing_) do_write();
        guard.reset();
      });
    });
    ioc_.run();
    loop.join();
  }

  void tick_loop(SessionHost& host) {
    using clock = std::chrono::steady_clock;
    const auto dt = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(config_.run.world.dt));
    std::optional<clock::time_point> start;
    long ticks = 0;

    for (;;) {
      std::deque<std::string> inbox;
      bool closed = false;
      {
        std::unique_lock lock(in_mu_);
        if (!host.running() || !start) {
          in_cv_.wait_for(lock, std::chrono::milliseconds(20),
                          [&] { return !inbound_.empty() || peer_closed_; });
        }
        inbox.swap(inbound_);
        closed = peer_closed_;
      }
      for (const std::string& text : inbox) send(host.handle(text));
      if (closed || host.ended()) break;
      if (!host.running()) continue;

      if (!start) start = clock::now();
      send(host.tick());
      ++ticks;
      if (!config_.headless_speed) {
        // Deadline from the session start, so sleep jitter never accumulates.
        std::this_thread::sleep_until(*start + ticks * dt);
      }
    }
    if (host.greeted()) on_archive_(host.finish());
  }

  void start_read() {
    ws_->async_read(read_buf_, [this](beast::error_code ec, std::size_t) {
      if (ec) {
        {
          std::lock_guard lock(in_mu_);
          peer_closed_ = true;
        }
        in_cv_.notify_all();
        return;
      }
      {
        std::lock_guard lock(in_mu_);
        inbound_.push_back(beast::buffers_to_string(read_buf_.data()));
      }
      read_buf_.consume(read_buf_.size());
      in_cv_.notify_all();
      start_read();
    });
  }

  // Hands outgoing messages to the io thread.
  void send(std::vector<Outgoing> outs) {
    if (outs.empty()) return;
    net::post(ioc_, [this, outs = std::move(outs)]() mutable {
      for (Outgoing& o : outs) {
        if (o.kind == Outgoing::Kind::State) {
          // Latest wins: an undelivered state is superseded by a newer one.
          std::erase_if(outq_, [](const Outgoing& q) { return q.kind == Outgoing::Kind::State; });
        }
        if (o.close_after) close_requested_ = true;
        outq_.push_back(std::move(o));
      }
      if (!writing_) do_write();
    });
  }

  void do_write() {
    if (dead_) return;
    if (outq_.empty()) {
      if (close_requested_ && !closing_) {
        closing_ = true;
        ws_->async_close(websocket::close_code::normal, [](beast::error_code) {});
      }
      return;
    }
    writing_ = true;
    current_ = std::move(outq_.front().text);
    outq_.pop_front();
    ws_->async_write(net::buffer(current_), [this](beast::error_code ec, std::size_t) {
      writing_ = false;
      if (ec) {
        dead_ = true;
        outq_.clear();
        return;
      }
      do_write();
    });
  }

  const ServiceConfig& config_;
  std::atomic<bool>& busy_;
  std::function<void(std::filesystem::path)> on_archive_;
  net::io_context ioc_;
  tcp::socket socket_;
  std::optional<websocket::stream<tcp::socket>> ws_;
  std::atomic<int> fd_{-1};

  beast::flat_buffer read_buf_;
  std::mutex in_mu_;
  std::condition_variable in_cv_;
  std::deque<std::string> inbound_;
  bool peer_closed_ = false;

  // io-thread only
  std::deque<Outgoing> outq_;
  std::string current_;
  bool writing_ = false;
  bool close_requested_ = false;
  bool closing_ = false;
  bool dead_ = false;
};

}  // namespace

struct Server::Impl {
  ServiceConfig config;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread accept_thread;
  std::atomic<bool> busy{false};

  std::mutex mu;
  std::condition_variable stopped_cv;
  bool stopped = false;
  bool done = false;
  std::vector<std::filesystem::path> archives;
  std::list<std::pair<std::shared_ptr<Connection>, std::thread>> conns;

  void accept() {
    auto conn = std::make_shared<Connection>(config, busy, [this](std::filesystem::path p) {
      std::lock_guard lock(mu);
      archives.push_back(std::move(p));
    });
    acceptor.async_accept(conn->socket(), [this, conn](beast::error_code ec) {
      if (ec) return;
      {
        std::lock_guard lock(mu);
        reap();
        conns.emplace_back(conn, std::thread([conn] { conn->run(); }));
      }
      accept();
    });
  }

  // Joins finished connection threads. Caller holds mu.
  void reap() {
    for (auto it = conns.begin(); it != conns.end();) {
      if (it->first.use_count() == 1 && it->second.joinable()) {
        it->second.join();
        it = conns.erase(it);
      } else {
        ++it;
      }
    }
  }
};

Server::Server(ServiceConfig config) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
}

Server::~Server() { stop(); }

unsigned short Server::start() {
  auto& im = *impl_;
  const tcp::endpoint ep{net::ip::tcp::v4(), im.config.port};
  im.acceptor.open(ep.protocol());
  im.acceptor.set_option(net::socket_base::reuse_address(true));
  im.acceptor.bind(ep);
  im.acceptor.listen();
  const unsigned short port = im.acceptor.local_endpoint().port();
  im.accept();
  im.accept_thread = std::thread([&im] { im.ioc.run(); });
  spdlog::info("listening on port {} (endpoint /session)", port);
  return port;
}

void Server::stop() {
  auto& im = *impl_;
  {
    std::lock_guard lock(im.mu);
    if (im.stopped) return;
    im.stopped = true;
  }
  net::post(im.ioc, [&im] {
    beast::error_code ec;
    im.acceptor.close(ec);
  });
  if (im.accept_thread.joinable()) {
    im.accept_thread.join();
  }
  std::list<std::pair<std::shared_ptr<Connection>, std::thread>> conns;
  {
    std::lock_guard lock(im.mu);
    conns.swap(im.conns);
  }
  for (auto& [conn, thread] : conns) {
    conn->abort();
    if (thread.joinable()) thread.join();
  }
  {
    std::lock_guard lock(im.mu);
    im.done = true;
  }
  im.stopped_cv.notify_all();
}

void Server::wait() {
  auto& im = *impl_;
  std::unique_lock lock(im.mu);
  im.stopped_cv.wait(lock, [&im] { return im.done; });
}

std::vector<std::filesystem::path> Server::archives() const {
  std::lock_guard lock(impl_->mu);
  return impl_->archives;
}

}  // namespace mexgen::service
