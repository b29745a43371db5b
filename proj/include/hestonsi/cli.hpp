#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hestonsi {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitDomainError = 1, kExitUsageError = 2 };

/// Runs one command line (without the program name). Subcommands: simulate,
/// fit-direct, fit-sliced, study-single, study-multi, acf. Artifacts go to
/// --out (default "."); domain errors are reported on `err` as one JSON line.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hestonsi
