#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "dough/io.hpp"

namespace dough {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;  // unexpected internal error
inline constexpr int kUsage = 2;
inline constexpr int kInfeasible = 3;
inline constexpr int kCapExceeded = 4;
inline constexpr int kUnschedulable = 5;
inline constexpr int kMismatch = 6;
}  // namespace exit_code

/// Environment variable naming the default platform file.
inline constexpr const char* kPlatformEnv = "CGRA_DOUGH_PLATFORM";

/// `builtin:NAME?params` or a path to a `.kdl` file.
LoopKernel load_kernel(const std::string& arg);

/// "1,1,2" or "1x1x2".
Factor parse_factor(const std::string& text);

/// "3", "0..9" (inclusive) or "1,4,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text);

/// Runs one command line (args excludes the program name). Human-readable
/// output goes to `out`, diagnostics to `err`. Returns an exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dough
