#pragma once

#include "bohm/core.hpp"
#include "bohm/report.hpp"
#include "bohm/scenarios.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace bohm::cli {

// Malformed or invalid run configuration; maps to exit status 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"check", "residuals", "trajectories", "reduce", "hj-verify",
                                             "superposition-demo"};
  return c;
}

struct GridSpec {
  Vec lo;
  Vec hi;
  std::vector<int> samples;  // per axis, each >= 2
};

struct TrajectorySpec {
  std::vector<Point> seeds;
  std::optional<double> span;
  int steps = 100;
  double rtol = 1e-9;
  double atol = 1e-12;
};

struct RunConfig {
  std::string scenario;
  ParamMap params;
  std::string command;
  std::optional<GridSpec> grid;
  std::optional<TrajectorySpec> trajectories;
  std::string output = "out";
  std::string format = "csv";
  int jobs = 1;
  double tolerance_scale = 1.0;
  std::string canonical;  // filled by run(): canonical JSON of everything that affects the numbers
};

/// Parses a JSON run configuration. Throws ConfigError with line/column for
/// syntax errors and with the offending field name for schema errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::string& bytes);

/// Runs the configured command. Returns 0 when every gated report passes,
/// 1 on tolerance or numerical failure, 2 on configuration errors.
int run(const RunConfig& config, std::ostream& log);

/// Command-line entry point.
int main(int argc, char** argv);

/// Column documentation shown by --help.
const char* formats_help();

}  // namespace bohm::cli
