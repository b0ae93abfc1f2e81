#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace otmetrics {

// Exit codes: 0 ok, 1 I/O, 2 schema, 3 numeric, 4 every sweep cell failed, 64 usage.
inline constexpr int kExitSweepFailed = 4;

// Runs the command line `args` (without the program name) in-process.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace otmetrics
