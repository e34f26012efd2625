#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ctlpp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

/// Entry point of the ctlpp tool: subcommands generate, verify, analyze,
/// report and graph. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctlpp
