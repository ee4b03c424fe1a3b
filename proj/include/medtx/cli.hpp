#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace medtx::cli {

/// Exit code for malformed command lines (unknown flag, missing subcommand).
inline constexpr int kUsageError = 2;

/// Runs one `medtx` invocation. `args` excludes the program name.
/// Returns 0 only when the subcommand fully succeeded.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace medtx::cli
