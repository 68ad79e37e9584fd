#pragma once

#include <ostream>

namespace cgate::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kInternalError = 4 };

// Entry point shared by the binary and the tests. Errors go to `err` as a
// single line: error kind=<config|data|internal> flag=<--flag|-> message="..."
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace cgate::cli
