#pragma once

// Command-line front end: run, sweep and validate subcommands.
// Exit codes: 0 success, 1 invalid config or arguments, 2 runtime failure.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace elmarket::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitRuntime = 2;

/// A config argument names a file, or a bundled preset by name with or
/// without the .json suffix.
std::filesystem::path locate_config(const std::string& arg);

struct RunOptions {
  std::string config;
  std::filesystem::path out_dir;  // empty: runs/<scenario name>
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

struct SweepSpec {
  std::string field;
  std::vector<std::string> values;
};

/// "field=v1,v2,..."; throws std::invalid_argument when malformed or empty.
SweepSpec parse_sweep_spec(const std::string& text);

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunOptions& opt, const std::string& parameter_spec, std::ostream& out,
              std::ostream& err);
int cmd_validate(const std::string& config, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace elmarket::cli
