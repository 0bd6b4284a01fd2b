#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fsde {

/// Bad argument values (non-positive step sizes, invalid grids, ...).
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Operands whose dimensions do not agree.
struct DimensionMismatch : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

/// A scalar function was evaluated outside its domain inside a matrix
/// function (e.g. sqrt of a negative eigenvalue without a clamp policy).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// The iterative symmetric eigensolver failed to converge.
struct EigFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An eigenvalue clamp was required while strict PSD mode was active.
struct StrictModeViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A state drifted away from symmetry beyond the integrator's abort
/// threshold; the path is numerically invalid.
struct SymmetryViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Spectral summaries require at least one ensemble member.
struct EmptyEnsemble : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

/// Weak-error studies need a model with a closed-form reference mean.
struct MissingReference : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Order fitting needs >= 2 rows with positive errors and distinct steps.
struct DegenerateFit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Wraps a per-path failure with the path index and step at which it
/// occurred, so drivers can report where an ensemble run died.
struct PathFailure : std::runtime_error {
  PathFailure(std::uint64_t path, std::int64_t step_index, const std::string& reason)
      : std::runtime_error("path " + std::to_string(path) + ", step " +
                           std::to_string(step_index) + ": " + reason),
        path_index(path),
        step(step_index) {}

  std::uint64_t path_index;
  std::int64_t step;
};

}  // namespace fsde
