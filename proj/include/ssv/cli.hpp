#pragma once

#include <iosfwd>

namespace ssv::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kIoOrParse = 2;
inline constexpr int kValidation = 3;

/// Environment variable naming the directory that receives outputs when no
/// --output is given. Without it results go to `out`.
inline constexpr const char* kOutputDirEnv = "SSV_OUTPUT_DIR";

/// Entry point of the `ssv` tool. Subcommands: simulate, sweep, population,
/// check, diagnose.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ssv::cli
