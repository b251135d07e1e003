// The vss-sim command line, callable in-process for testing.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vss::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,     // runtime failure, e.g. non-finite integration state
    kBadConfig = 2,   // invalid config file, trace file or command line
    kPortInUse = 3,
};

/// `args` excludes the program name. Errors are reported on `err` as one
/// JSON object: {"error": kind, "field"?: dotted path, "message": text}.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Applies VSS_SIM_LOG (trace, debug, info, warn, error, critical, off) to
/// the process-wide logger, which writes to stderr.
void configure_logging();

} // namespace vss::cli
