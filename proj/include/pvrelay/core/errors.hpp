#pragma once

#include <stdexcept>
#include <string>

namespace pvrelay {

/// Invalid configuration: bad keys, empty sweep axes, contradictory settings.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (corpus files, records, bundles).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A training stage could not run (missing class coverage, degenerate labels).
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Process exit codes used by the command line tool.
enum class ExitCode : int { ok = 0, usage = 1, config = 2, data = 3, training = 4 };

}  // namespace pvrelay
