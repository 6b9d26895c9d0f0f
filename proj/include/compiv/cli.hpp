#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace compiv {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the command-line interface on argv-style arguments (args[0] is the
/// program name). Output files are written as requested; messages go to
/// `out` and `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace compiv
