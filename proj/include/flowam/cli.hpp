#pragma once

#include <iosfwd>

namespace flowam {

// Exit codes: 0 success, 1 usage / validation / IO failure, 2 numerical abort.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNumerical = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flowam
