#pragma once

#include <iosfwd>

namespace planout {

/// Entry point of the `planout` tool. Returns 0 on success, 1 for user
/// errors (bad flags, bad scripts, failed operations) and 2 for internal
/// errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace planout
