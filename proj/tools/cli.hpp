#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pairlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitNotConverged = 3;

/// Runs one `pairlab` invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pairlab::cli
