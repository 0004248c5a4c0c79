#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace frwkv::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kUserError = 2, kNumericFailure = 3 };

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace frwkv::cli
