#pragma once

#include <string>
#include <vector>

namespace delaynet {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitRejected = 2;
inline constexpr int kExitNoConvergence = 3;

// Runs the command-line tool in-process. argv[0] is the program name.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace delaynet
