#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rotmap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one subcommand. args excludes the program name. Progress goes to
/// `log` as one JSON object per line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log);

}  // namespace rotmap::cli
