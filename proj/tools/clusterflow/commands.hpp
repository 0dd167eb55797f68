#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace clusterflow::cli {

enum ExitCode : int { kOk = 0, kUserError = 1, kInternalError = 2 };

/// Runs one command line (without the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace clusterflow::cli
