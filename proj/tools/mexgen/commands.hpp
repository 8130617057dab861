#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mexgen/archive.hpp"

namespace mexgen::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,       // usage or validation error
  kDivergence = 3,  // replay diverged
  kTolerance = 4,   // analytic tolerance failure
};

struct SimulateOptions {
  std::filesystem::path scenario;
  std::filesystem::path script;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
};

int simulate(const SimulateOptions& opts, std::ostream& out, std::ostream& err);
int replay(const std::filesystem::path& session, bool verify, std::ostream& out, std::ostream& err);
int plot(const std::filesystem::path& session, const std::string& figure,
         const std::filesystem::path& out_file, std::ostream& err);
int validate(const std::filesystem::path& session, std::ostream& out, std::ostream& err);

struct ServeOptions {
  unsigned short port = 8080;
  std::optional<std::filesystem::path> scenario;
  std::optional<std::filesystem::path> config;
  std::filesystem::path record = "sessions";
  bool headless_speed = false;
  std::optional<std::filesystem::path> ui_dir;
  double broadcast_rate = 20.0;
};

int serve(const ServeOptions& opts, std::ostream& err);

// Evidence checks run by `validate`: cadence, lifecycle, spawn alignment, parabola fits.
// `failing` lists the metrics outside tolerance.
struct ValidationReport {
  nlohmann::json json;
  std::vector<std::string> failing;
};
ValidationReport validate_archive(const SessionArchive& archive);

// Full command-line entry point (argv[0] is the program name).
int run(int argc, char** argv);

// Applies MEXGEN_LOG (error|warn|info|debug) to the global logger.
void configure_logging();

}  // namespace mexgen::cli
