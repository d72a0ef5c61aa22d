#pragma once

#include <exception>
#include <map>
#include <ostream>
#include <string>

namespace mffnc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

// 2 for configuration, usage and I/O problems, 3 for malformed data, 4 for
// NaN/Inf during a computation.
int exit_code_for(const std::exception& e);

// Flat "key = value" file. '#' starts a comment, values may be double-quoted,
// keys are unique. Throws IoError / ConfigError.
std::map<std::string, std::string> read_flat_config(const std::string& path);

// Entry point of the mffnc tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mffnc
