#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dslite::cli {

// Runs the dslite command line in-process. `args` excludes the program name.
// Returns the exit code: 0 success, 1 usage or configuration error, 2 data
// error, 3 internal invariant violation.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dslite::cli
