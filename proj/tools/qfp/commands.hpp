#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace qfp::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

/// Runs the qfp command line; `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace qfp::tools
