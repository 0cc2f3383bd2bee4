#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace provar::cli {

enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kValidationFailure = 2,
  kInputError = 3,
};

/// Runs the provar command line; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace provar::cli
