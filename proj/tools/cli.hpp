#pragma once

#include <iosfwd>

namespace smart::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace smart::cli
