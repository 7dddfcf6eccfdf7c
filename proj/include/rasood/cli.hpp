#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rasood::cli {

enum ExitCode : int { kOk = 0, kIoError = 2, kValidationError = 3, kNumericError = 4 };

/// Runs one `rasood` invocation. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rasood::cli
