#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qmem::cli {

inline constexpr int kExitSuccess = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

// Runs the qmem command line with argv-style arguments (args[0] is the program
// name). Output CSV goes to `out`, diagnostics to `err`. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qmem::cli
