#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace shredder::cli {

// Exit codes shared by every subcommand.
inline constexpr int kSuccess = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kUsageError = 2;

// Parses `args` (without the program name) and runs one subcommand.
// Normal output goes to `out`, progress and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace shredder::cli
