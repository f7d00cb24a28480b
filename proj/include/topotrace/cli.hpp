#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace topotrace::cli {

/// Exit codes: 0 success, 1 domain error, 2 usage error.
int run(int argc, char** argv);

/// Same as run() with explicit streams; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace topotrace::cli
