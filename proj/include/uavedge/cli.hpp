#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace uavedge {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsageOrIo = 1,
  kExitInfeasible = 2,
  kExitBudgetViolated = 3,
};

/// Runs one verb (plan | validate | compare | sweep | gen-scenario).
/// `args` excludes the program name. Progress goes to `out`, errors to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parameters accepted by `sweep --param`.
std::vector<std::string> sweep_parameters();

}  // namespace uavedge
