#pragma once

#include <stdexcept>

namespace seamcnn {

// Error taxonomy. The CLI maps these onto process exit codes
// (config -> 2, data/io -> 3, checkpoint -> 4).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/grid extents do not fit the operation (includes over-carving).
struct ShapeError : Error {
    using Error::Error;
};

// Operation sequencing violated, e.g. backward without a cached forward.
struct StateError : Error {
    using Error::Error;
};

// Invalid configuration value (negative lr, patience >= max epochs, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Unreadable or undecodable input data.
struct DataError : Error {
    using Error::Error;
};

// Filesystem write failure.
struct IoError : Error {
    using Error::Error;
};

// Checkpoint file missing, malformed, or incompatible.
struct CheckpointError : Error {
    using Error::Error;
};

} // namespace seamcnn
