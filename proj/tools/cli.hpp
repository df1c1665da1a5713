#pragma once

#include <ostream>

namespace rma::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2, kDiverged = 3 };

/// Entry point of the `rma` tool; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rma::cli
