#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lsec {

// Runs one subcommand and returns the process exit code:
// 0 success, 1 usage error, 2 data error, 3 runtime or numeric error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lsec
