#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vaxcast::cli {

// Runs one vaxcast invocation. `args` excludes the program name. Errors are
// reported on `err` as a single line "vaxcast: error: <module>: <message>".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vaxcast::cli
