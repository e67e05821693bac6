#pragma once

#include <ostream>

namespace eoc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Entry point of the eoc_lowrank tool. Tables go to `out` (or the --out
/// file), diagnostics to `err`. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace eoc
