#pragma once

#include <string>
#include <vector>

namespace sar::cli {

// Dispatches one subcommand. args excludes the program name, e.g.
// {"gen-data", "--config", "exp.toml", "--out", "data"}.
// Exit codes: 0 success, 2 usage error, 3 configuration or invariant
// violation, 1 anything else. Errors print one line to stderr:
//   error: <category>: <message>
int run_command(const std::vector<std::string>& args);

}  // namespace sar::cli
