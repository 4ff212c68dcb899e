#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vfss {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one `vfss` subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 for usage errors, 2 for data/validation errors and 3 for
/// internal failures; diagnostics go to `err` as a single line.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vfss
