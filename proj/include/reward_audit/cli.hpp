#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace reward_audit {

/// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line without the program name, e.g. {"corpus", "run", "--format", "csv"}.
/// Reports go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace reward_audit
