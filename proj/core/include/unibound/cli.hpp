#pragma once

#include <string>
#include <vector>

namespace unibound::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;         // malformed flags or config
inline constexpr int kExitFailure = 2;       // model/run/oracle error
inline constexpr int kExitViolations = 3;    // verify: under-approximation violated
inline constexpr int kExitInconclusive = 4;  // verify: boundary mass too high to judge

/// Command-line entry point shared by the binary and the CLI tests.
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace unibound::cli
