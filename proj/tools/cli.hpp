#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace askdetect::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitAlignment = 3;

/// Runs the askdetect command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

/// Runs `command` through /bin/sh, feeding `input` on stdin; returns stdout.
/// Throws askdetect::Error when the command cannot start or exits non-zero.
std::string pipe_through(const std::string& command, const std::string& input);

}  // namespace askdetect::cli
