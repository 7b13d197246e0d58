#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ddsr::cli {

/// Runs one command line (without the program name). Returns the process
/// exit code: 0 on success, 2 on usage errors, 1 on any other failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ddsr::cli
