#include "commands.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mexgen/analytics.hpp"
#include "mexgen/config.hpp"
#include "mexgen/service.hpp"
#include "mexgen/session.hpp"

namespace mexgen::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void configure_logging() {
  auto logger = spdlog::get("mexgen");
  if (!logger) logger = spdlog::stderr_color_mt("mexgen");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("MEXGEN_LOG")) {
    const std::string v = env;
    if (v == "error") spdlog::set_level(spdlog::level::err);
    else if (v == "warn") spdlog::set_level(spdlog::level::warn);
    else if (v == "info") spdlog::set_level(spdlog::level::info);
    else if (v == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("ignoring MEXGEN_LOG={} (expected error|warn|info|debug)", v);
  }
}

int simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err) {
  RunConfig config;
  ScenarioSpec scenario;
  std::vector<InputRecord> script;
  try {
    if (!fs::is_regular_file(opts.scenario)) {
      err << "scenario file not found: " << opts.scenario.string() << "\n";
      return kUsage;
    }
    if (!fs::is_regular_file(opts.script)) {
      err << "script file not found: " << opts.script.string() << "\n";
      return kUsage;
    }
    scenario = load_scenario(opts.scenario);
    if (opts.config) config = load_run_config(*opts.config);
    const std::string text = read_text_file(opts.script);
    script = expand_script(parse_inputs_csv(text, opts.script.filename().string(), false));
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kUsage;
  }

  try {
    const std::string id = "sim-" + sha256_hex(config_digest(archived_config(config, scenario)) +
                                               read_text_file(opts.script))
                                        .substr(0, 12);
    Session session(config, scenario, id, current_rfc3339());
    for (const InputRecord& r : script) session.step(r.input);
    const SessionArchive archive = session.finalize();
    write_session(archive, opts.out);
    out << json{{"session_id", archive.session_id},
                {"out", opts.out.string()},
                {"tick_count", archive.tick_count()},
                {"frame_count", archive.frames.size()},
                {"object_rows", archive.objects.size()},
                {"final_state_hash", archive.final_state_hash}}
               .dump()
        << "\n";
  } catch (const ScenarioError& e) {
    err << "scenario " << opts.scenario.string() << ": " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}

int replay(const fs::path& session, bool verify, std::ostream& out, std::ostream& err) {
  try {
    if (verify) {
      if (auto d = verify_replay(session)) {
        err << "ReplayDivergence(" << d->tick << "): " << d->detail << "\n";
        out << json{{"verified", false}, {"divergent_tick", d->tick}}.dump() << "\n";
        return kDivergence;
      }
      out << json{{"verified", true}}.dump() << "\n";
      return kOk;
    }
    const SessionArchive archive = read_session(session);
    const ReplayResult r = replay(archive);
    out << json{{"tick_count", r.hashes.size()},
                {"final_state_hash", r.hashes.empty() ? "" : hash_hex(r.hashes.back())}}
               .dump()
        << "\n";
    return kOk;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kUsage;
  }
}

int plot(const fs::path& session, const std::string& figure, const fs::path& out_file,
         std::ostream& err) {
  const auto kind = analytics::plot_kind_from_string(figure);
  if (!kind) {
    err << "unknown figure '" << figure << "' (expected throws3d or paths2d)\n";
    return kUsage;
  }
  try {
    const SessionArchive archive = read_session(session);
    const std::string svg = analytics::export_plot(archive, *kind);
    std::ofstream f(out_file, std::ios::binary | std::ios::trunc);
    if (!f) {
      err << "cannot write " << out_file.string() << "\n";
      return kUsage;
    }
    f << svg;
    return f ? kOk : kUsage;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kUsage;
  }
}

ValidationReport validate_archive(const SessionArchive& archive) {
  ValidationReport rep;
  json& j = rep.json;
  j["session_id"] = archive.session_id;
  j["frame_count"] = archive.frames.size();

  try {
    check_cadence(archive.frames);
    j["cadence"] = {{"ok", true}};
  } catch (const ValidationError& e) {
    j["cadence"] = {{"ok", false}, {"error", e.what()}};
    rep.failing.push_back("cadence");
  }
  try {
    check_lifecycle(archive.objects);
    j["lifecycle"] = {{"ok", true}};
  } catch (const ValidationError& e) {
    j["lifecycle"] = {{"ok", false}, {"error", e.what()}};
    rep.failing.push_back("lifecycle");
  }

  // Linear interpolation error is at most v * h / 2 for frame interval h = 0.1 s;
  // the absolute slack covers 6-decimal CSV rounding.
  double v_ctrl = 0.0;
  for (std::size_t i = 1; i < archive.frames.size(); ++i)
    v_ctrl = std::max(v_ctrl, norm(archive.frames[i].controller - archive.frames[i - 1].controller) /
                                  0.1);
  const double bound = v_ctrl * 0.05 + 1e-5;
  const analytics::AlignmentReport align = analytics::check_spawn_alignment(archive);
  json aj = align.to_json();
  aj["bound_m"] = bound;
  aj["ok"] = !align.max_m || *align.max_m <= bound;
  if (!aj["ok"].get<bool>()) rep.failing.push_back("alignment");
  j["alignment"] = aj;

  RunConfig config;
  ScenarioSpec scenario;
  split_archived_config(archive.config, config, scenario);
  const double g = config.world.gravity;
  j["gravity"] = g;
  json fits = json::array();
  bool fits_ok = true;
  for (const analytics::ThrowSegment& seg : analytics::segment_throws(archive)) {
    const auto track = analytics::distinct_times(seg.track);
    json fj = {{"object_id", seg.object_id}, {"points", track.size()}};
    // Short tracks amplify the 6-decimal time rounding past the 1% gate.
    if (track.size() < 4 || track.back().t - track.front().t < 0.1) {
      fj["skipped"] = "track shorter than 4 points or 0.1 s";
      fits.push_back(fj);
      continue;
    }
    const analytics::ParabolaFit fit = analytics::fit_parabola(track);
    const double tol = 0.01 * g + 1e-3;
    const bool ok = std::abs(fit.g_est - g) <= tol;
    fj["g_est"] = fit.g_est;
    fj["rel_err"] = g > 0.0 ? std::abs(fit.g_est - g) / g : std::abs(fit.g_est);
    fj["rms_m"] = fit.rms_residual;
    fj["ok"] = ok;
    fits_ok = fits_ok && ok;
    fits.push_back(fj);
  }
  j["fits"] = fits;
  if (!fits_ok) rep.failing.push_back("gravity_fit");
  j["ok"] = rep.failing.empty();
  j["failing"] = rep.failing;
  return rep;
}

int validate(const fs::path& session, std::ostream& out, std::ostream& err) {
  SessionArchive archive;
  try {
    archive = read_session(session, ReadMode::Lenient);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kUsage;
  }
  ValidationReport rep;
  try {
    rep = validate_archive(archive);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kUsage;
  }
  out << rep.json.dump(2) << "\n";
  if (!rep.failing.empty()) {
    for (const std::string& m : rep.failing) err << "tolerance failure: " << m << "\n";
    return kTolerance;
  }
  return kOk;
}

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

}  // namespace

int serve(const ServeOptions& opts, std::ostream& err) {
  service::ServiceConfig cfg;
  try {
    if (opts.scenario) {
      if (!fs::is_regular_file(*opts.scenario)) {
        err << "scenario file not found: " << opts.scenario->string() << "\n";
        return kUsage;
      }
      cfg.scenario = load_scenario(*opts.scenario);
    }
    if (opts.config) cfg.run = load_run_config(*opts.config);
    world_init(cfg.run, cfg.scenario);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kUsage;
  }
  cfg.port = opts.port;
  cfg.record_dir = opts.record;
  cfg.headless_speed = opts.headless_speed;
  cfg.ui_dir = opts.ui_dir;
  cfg.broadcast_rate = opts.broadcast_rate;

  service::Server server(cfg);
  try {
    const unsigned short port = server.start();
    err << "serving ws://0.0.0.0:" << port << "/session\n";
  } catch (const std::exception& e) {
    err << "cannot listen on port " << opts.port << ": " << e.what() << "\n";
    return kUsage;
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"mexgen: magical experience generator simulator and session service"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* c_sim = app.add_subcommand("simulate", "run a scripted headless session");
  c_sim->add_option("--scenario", sim.scenario, "scenario JSON")->required();
  c_sim->add_option("--script", sim.script, "timed inputs (inputs.csv schema)")->required();
  std::string sim_config;
  c_sim->add_option("--config", sim_config, "run config JSON");
  c_sim->add_option("--out", sim.out, "session output directory")->required();

  fs::path session;
  bool verify = false;
  auto* c_replay = app.add_subcommand("replay", "re-simulate a session from its input log");
  c_replay->add_option("--session", session, "session directory")->required();
  c_replay->add_flag("--verify", verify, "byte-compare regenerated CSVs");

  std::string figure;
  fs::path plot_out;
  auto* c_plot = app.add_subcommand("plot", "export an SVG trajectory plot");
  c_plot->add_option("--session", session, "session directory")->required();
  c_plot->add_option("--figure", figure, "throws3d | paths2d")->required();
  c_plot->add_option("--out", plot_out, "SVG output file")->required();

  auto* c_validate = app.add_subcommand("validate", "run cadence, lifecycle, alignment and fit checks");
  c_validate->add_option("--session", session, "session directory")->required();

  ServeOptions srv;
  std::string srv_scenario, srv_config, srv_ui;
  auto* c_serve = app.add_subcommand("serve", "serve live sessions over WebSocket");
  c_serve->add_option("--port", srv.port, "listen port")->capture_default_str();
  c_serve->add_option("--scenario", srv_scenario, "scenario JSON");
  c_serve->add_option("--config", srv_config, "run config JSON");
  c_serve->add_option("--record", srv.record, "archive parent directory")->capture_default_str();
  c_serve->add_flag("--headless-speed", srv.headless_speed, "tick as fast as possible");
  c_serve->add_option("--ui-dir", srv_ui, "static files for the browser client");
  c_serve->add_option("--broadcast-rate", srv.broadcast_rate, "state messages per second")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  configure_logging();

  if (*c_sim) {
    if (!sim_config.empty()) sim.config = sim_config;
    return simulate(sim, std::cout, std::cerr);
  }
  if (*c_replay) return replay(session, verify, std::cout, std::cerr);
  if (*c_plot) return plot(session, figure, plot_out, std::cerr);
  if (*c_validate) return validate(session, std::cout, std::cerr);
  if (*c_serve) {
    if (!srv_scenario.empty()) srv.scenario = srv_scenario;
    if (!srv_config.empty()) srv.config = srv_config;
    if (!srv_ui.empty()) srv.ui_dir = srv_ui;
    return serve(srv, std::cerr);
  }
  return kUsage;
}

}  // namespace mexgen::cli
