#pragma once

// Command-line front end: simulate, fit, experiment, verify, report.

#include <ostream>
#include <string>
#include <vector>

namespace pbsdm {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitUsage = 2;

// args excludes the program name. Never throws; errors become exit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pbsdm
