#pragma once

#include <iosfwd>

namespace rbstab {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kNotConverged = 2;
inline constexpr int kUsage = 64;
inline constexpr int kFingerprint = 65;
inline constexpr int kNumerical = 70;
inline constexpr int kIo = 74;
}  // namespace exit_code

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "RBSTAB_OUT_DIR";

/// Entry point behind the `rbstab` executable. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rbstab
