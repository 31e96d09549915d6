#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pose_forge::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalidConfig = 2;

// Entry point of the pose_forge command line. `args` excludes the program
// name. Commands:
//   synth    --config <json> [--out <dir>] [--seed <u64>]
//   train    --config <json> [--out <dir>] [--seed <u64>]
//   pipeline --config <json> [--out <dir>] [--seed <u64>] [--inject-reference <csv>]
//   report   [<csv>...] [--inject-reference <csv>] [--out <dir>]
// Returns 0 on success, 1 on a runtime failure, 2 on an invalid
// configuration.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pose_forge::app
