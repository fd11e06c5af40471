#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace hetrel {

enum ExitCode : int {
  kExitOk = 0,
  kExitVerification = 1,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

// Flat `key = value` file; '#' starts a comment line. Throws ConfigError on a
// malformed line, a duplicate key or a key outside `allowed`.
std::map<std::string, std::string> read_config(const std::filesystem::path& path,
                                               const std::vector<std::string>& allowed);

// Runs `hetrel <args...>` (args excludes the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hetrel
