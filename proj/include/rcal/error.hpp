#pragma once

#include <stdexcept>
#include <string>

namespace rcal {

// Base class for everything this library throws on purpose.
struct CalibError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A precondition on a value was violated (non-finite input, negative range, ...).
struct InvalidArgumentError final : CalibError {
  using CalibError::CalibError;
};

// Fewer data points than the operation can work with.
struct InsufficientDataError final : CalibError {
  using CalibError::CalibError;
};

// The input admits no unique answer (rank-deficient matrix, collinear points).
struct DegenerateInputError final : CalibError {
  using CalibError::CalibError;
};

// Projection is undefined because the point sits on the camera plane.
struct ProjectionUndefinedError final : CalibError {
  using CalibError::CalibError;
};

// RANSAC found no hypothesis with enough inliers.
struct NoConsensusError final : CalibError {
  using CalibError::CalibError;
};

// The objective cannot be linearized at the requested point.
struct LinearizationError final : CalibError {
  using CalibError::CalibError;
};

// A configuration object is internally inconsistent.
struct ConfigError final : CalibError {
  using CalibError::CalibError;
};

// An operation that needs at least one element got none.
struct EmptySetError final : CalibError {
  using CalibError::CalibError;
};

// A scene configuration produced no visible detections.
struct EmptySceneError final : CalibError {
  using CalibError::CalibError;
};

// Filesystem-level failure (missing file, unwritable path).
struct IoError final : CalibError {
  using CalibError::CalibError;
};

// A file header does not match the expected schema.
struct SchemaError final : CalibError {
  using CalibError::CalibError;
};

// A row or field could not be parsed or violates a field invariant.
struct ParseError final : CalibError {
  using CalibError::CalibError;
};

// A calibration artifact fails its structural invariants on read.
struct CorruptArtifactError final : CalibError {
  using CalibError::CalibError;
};

}  // namespace rcal
