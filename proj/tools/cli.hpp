#pragma once

#include <ostream>

namespace qasir::cli {

inline constexpr int kOk = 0;
inline constexpr int kValidationError = 1;
inline constexpr int kIoError = 2;
inline constexpr int kUsageError = 64;

// Entry point of the `qasir` tool; argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace qasir::cli
