#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gfts {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitUsage = 64;

inline constexpr const char* kToolVersion = "0.1.0";

/// Entry point of the `gfts` tool. Never throws; the return value is the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lower-case hex SHA-256 of a file's bytes.
[[nodiscard]] std::string sha256_file(const std::string& path);

}  // namespace gfts
