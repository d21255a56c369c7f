#pragma once

#include <iosfwd>

namespace arflow::cli {

/// Entry point of the `arflow` command-line tool (generate | train | evaluate).
/// Returns the process exit code. Errors are reported on `err` as a single
/// line of the form `error: <category>: <message>`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,     // bad flags or config file
  kInput = 3,     // missing / malformed input files, shape mismatches
  kTraining = 4,  // non-finite loss or gradient
  kOutput = 5,    // unwritable output
};

}  // namespace arflow::cli
