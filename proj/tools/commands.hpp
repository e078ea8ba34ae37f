#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rfx::cli {

// Parses one invocation (program name excluded) and runs it. Returns the
// process exit code: 0 success, 1 reproduction-check failure, 2 usage or
// configuration error.
int run_cli(std::vector<std::string> args, std::ostream& out);
int run_cli(std::vector<std::string> args);

}  // namespace rfx::cli
