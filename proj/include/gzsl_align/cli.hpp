#pragma once

#include <ostream>

namespace gzsl::cli {

/// Exit codes of the command-line front end.
enum ExitCode : int { kSuccess = 0, kValidationFailure = 1, kRuntimeError = 2 };

/// Parses and executes one command (`argv[0]` is the program name).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gzsl::cli
