#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace phaselsq::cli {

/// Runs one CLI invocation. `args` excludes the program name. Returns the
/// process exit code: 0 success, 1 usage error, 2 numerical/infeasibility
/// error. Normal output goes to `out`, diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phaselsq::cli
