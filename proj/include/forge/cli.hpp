#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace forge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Runs the `forge` command line. args excludes the program name. Data goes
/// to `out`; usage text and JSON-lines logs go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace forge::cli
