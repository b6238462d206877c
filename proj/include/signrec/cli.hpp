#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace signrec {

enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitUsage = 2 };

// Runs one `signrec` command. args excludes the program name. Machine-readable
// JSON goes to `out`; prose and diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace signrec
