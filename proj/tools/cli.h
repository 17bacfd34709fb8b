#pragma once

#include <iosfwd>
#include <stdexcept>

namespace evsr::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evsr::cli
