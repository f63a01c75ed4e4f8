#pragma once

#include <iosfwd>

namespace rydtrans::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr const char* kVersion = "0.1.0";

/// Entry point for the `rydtrans` tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rydtrans::cli
