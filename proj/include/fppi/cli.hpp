#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fppi {

// Exit codes of the command-line front end.
enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_bad_input = 2,
    exit_degenerate = 3,
    exit_nonconvergence = 4,
};

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fppi
