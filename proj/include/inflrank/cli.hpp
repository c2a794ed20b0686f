#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace inflrank {

// Runs one CLI invocation. args excludes the program name. Returns the
// process exit code: 0 ok, 2 config, 3 data, 4 numeric.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace inflrank
