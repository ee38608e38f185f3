#pragma once

#include <string>
#include <vector>

namespace webgym::cli {

// Full command dispatcher; argv[0] is the first argument, not the program
// name. Returns the process exit code: 0 success, 1 runtime failure (one-line
// diagnostic on stderr), 2 usage errors.
int run_cli(const std::vector<std::string>& args);

}  // namespace webgym::cli
