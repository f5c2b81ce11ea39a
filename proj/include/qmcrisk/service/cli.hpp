#pragma once

#include <iosfwd>

namespace qmcrisk::service {

/// The unified command line:
///
///   qmcrisk [--data-dir DIR] rng sources add|list
///   qmcrisk rng fetch --source ID --words N --out POOL
///   qmcrisk rng ingest --records FILE [--extract] [--out POOL]
///   qmcrisk rng validate --source ID --samples N [--report PATH]
///   qmcrisk risk run --prices CSV --portfolio FILE --method hist|mc ...
///   qmcrisk study run --runs K ...
///   qmcrisk data synth --assets A --days D --seed S --out CSV
///   qmcrisk serve [--listen HOST:PORT]
///
/// Returns the process exit code: 0 on success, 1 on error, 2 when a
/// validation battery fails.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qmcrisk::service
