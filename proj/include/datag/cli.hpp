#pragma once

#include <iosfwd>

namespace datag {

/// Entry point of the `datag` command-line tool. Returns the process exit
/// status; messages go to `out` and `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace datag
