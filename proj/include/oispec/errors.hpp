#pragma once

#include <stdexcept>
#include <string>

namespace oispec {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid inputs: bad arguments, malformed files, violated preconditions.
/// CLI maps these to exit code 2.
struct ValidationError : Error {
    using Error::Error;
};

/// A computation could not proceed (degenerate data, budget exceeded, ...).
/// CLI maps these to exit code 3.
struct ComputationError : Error {
    using Error::Error;
};

/// Manifest is syntactically or structurally broken.
struct ManifestError : ValidationError {
    using ValidationError::ValidationError;
};

/// Frame dimensions disagree with the manifest or with each other.
struct DimensionError : ValidationError {
    using ValidationError::ValidationError;
};

/// A frame file referenced by a manifest cannot be read.
struct FrameIoError : ValidationError {
    using ValidationError::ValidationError;
};

/// Lighting geometry unusable (rank-deficient, out of range).
struct GeometryError : ValidationError {
    using ValidationError::ValidationError;
};

} // namespace oispec
