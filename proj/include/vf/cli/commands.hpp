#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace vf {

// Entry point behind the `vf` executable. Returns the process exit code:
// 0 success, 2 config, 3 data, 4 architecture mismatch, 5 numeric, 1 other.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Matches `*` and `?` in the last path component; sorted lexicographically.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

// "1040" -> "1,040"
std::string thousands(long long v);

}  // namespace vf
