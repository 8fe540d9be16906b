#pragma once

#include <iosfwd>

namespace cfx {

enum ExitCode { kExitOk = 0, kExitError = 1, kExitInfeasible = 2, kExitLimit = 3 };

/// Entry point of the `cfx` tool: explain, oracle, export-milp, bench,
/// validate and synth subcommands.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cfx
