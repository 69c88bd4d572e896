#pragma once

#include <iosfwd>

namespace qafuse::cli {

/// Runs the qafuse command line. Exit codes: 0 success, 1 usage, 2 schema, 3 runtime.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qafuse::cli
