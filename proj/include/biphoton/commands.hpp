#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace biphoton::commands {

/// Environment variable naming the output directory when neither --out nor
/// the config's [output] dir is given.
inline constexpr const char* kOutDirEnv = "BIPHOTON_OUT_DIR";

/// Exit codes shared by all commands.
enum ExitCode : int {
  kOk = 0,
  kFailed = 1,          // invalid input or configuration; nothing valid written
  kNotConverged = 3,    // fit outputs written but no start converged
};

struct Options {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> format;  // bin | csv
  std::optional<std::filesystem::path> tags;
  std::optional<std::filesystem::path> spectrum;
  std::vector<double> powers;
  bool no_dispersion = false;
};

/// --out, then the config's output dir, then $BIPHOTON_OUT_DIR, then ".".
std::filesystem::path output_directory(const std::optional<std::filesystem::path>& out,
                                       const std::string& config_dir);

/// Each command reports progress on `log`, errors on `err`, and returns an
/// ExitCode.
int simulate(const Options& options, std::ostream& log, std::ostream& err);
int analyze(const Options& options, std::ostream& log, std::ostream& err);
int spectrum(const Options& options, std::ostream& log, std::ostream& err);
int fit(const Options& options, std::ostream& log, std::ostream& err);
int sweep(const Options& options, std::ostream& log, std::ostream& err);

}  // namespace biphoton::commands
