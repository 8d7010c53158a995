#pragma once

#include <stdexcept>
#include <string>

namespace tea {

// Invalid configuration or argument values (bad K, r <= 0, ...).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Dimension / layout mismatches; the message names the offending layer.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values encountered during computation.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File or format problems on checkpoints, datasets, reports.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rank-0 deviation matrix: callers should fall back to uniform coefficients.
struct DegenerateSubspaceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tea
