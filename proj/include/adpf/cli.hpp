#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

namespace adpf {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Entry point behind the `adpf` binary. `args` excludes the program name.
/// Verbs: gen, train, eval, export.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adpf
