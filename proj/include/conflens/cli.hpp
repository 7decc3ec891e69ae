#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace conflens::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kIo = 3 };

/// Runs one `conflens <subcommand> ...` invocation. args[0] is the program
/// name. Diagnostics go to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace conflens::cli
