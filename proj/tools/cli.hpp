#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ul::cli {

// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kIoError = 1;
inline constexpr int kPrecondition = 2;
inline constexpr int kAssertion = 3;

// args excludes the program name. The artifact goes to out (or --output),
// diagnostics to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Removes every "wall_time_ms" field from a JSON payload; other text is
// returned unchanged.
std::string strip_timing(const std::string& payload);

}  // namespace ul::cli
