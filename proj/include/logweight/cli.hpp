#pragma once

#include <iosfwd>

namespace logweight {

/// Exit codes: 0 pass, 1 a verification failed, 2 bad input or a failed
/// precondition. Reports go to `out`, human summaries to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace logweight
