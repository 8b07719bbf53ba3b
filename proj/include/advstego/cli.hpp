#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace advstego {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line. `args` excludes the program name. Normal output
/// goes to `out`, diagnostics to `err`; returns the process exit status.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace advstego
