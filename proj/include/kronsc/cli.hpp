#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kronsc::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kNumerical = 3,
  kIo = 4,
};

/// Runs the command line `args` (args[0] is the program name). Human-readable
/// output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kronsc::cli
