#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bbip::cli {

/// Process exit codes.
enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_config = 2,
    exit_data = 3,
    exit_numerical = 4,
};

/// Seed used when --seed is not given; always echoed so runs can be repeated.
inline constexpr std::uint64_t default_seed = 20240601;

/// Runs one invocation. `args` excludes the program name. Normal output goes
/// to `out`, diagnostics to `err`, `in` backs "-" input paths.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace bbip::cli
