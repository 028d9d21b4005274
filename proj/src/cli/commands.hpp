#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace labelshift::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitSelftest = 3;

/// Parses `args` (without the program name) and runs one command.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Fast invariant suite. `inject_fault` swaps in a truncation that skips the
/// renormalization step, as a negative control.
int run_selftest(std::ostream& out, bool inject_fault);

}  // namespace labelshift::cli
