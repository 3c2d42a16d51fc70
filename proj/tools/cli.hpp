#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deh::cli {

enum ExitCode : int {
  kOk = 0,
  kVerificationFailed = 1,
  kConfigError = 2,
  kIoError = 3,
  kRuntimeError = 4,
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deh::cli
