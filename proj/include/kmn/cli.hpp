#pragma once

#include <string>
#include <vector>

namespace kmn {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 0 success, 2 validation, 3 I/O, 4 numerical. CLI11 parse
// errors keep their own codes (help returns 0).
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace kmn
