#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace asr::cli {

// Runs one subcommand. args excludes the program name.
// Exit codes: 0 success, 1 user error, 2 internal error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace asr::cli
