#pragma once

#include <iosfwd>

namespace fairflda {

inline constexpr const char* kVersion = "1.0.0";

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitData = 3, kExitInfeasible = 4 };

/// Entry point of the `fairflda` tool: simulate, fit, predict, evaluate,
/// reproduce and tune-kappa subcommands.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fairflda
