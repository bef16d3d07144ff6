#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace esokit {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitInputError = 2,
  kExitUnsupported = 3,
};

// Entry point of the esokit command line; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace esokit
