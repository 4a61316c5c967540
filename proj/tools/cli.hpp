#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace textground::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitAdapter = 3;
inline constexpr int kExitData = 4;

// Runs the command line `args` (args[0] is the program name) and returns the
// exit code. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace textground::cli
