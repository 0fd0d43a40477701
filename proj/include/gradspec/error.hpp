#pragma once

#include <stdexcept>
#include <string>

namespace gradspec {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments, out-of-range indices, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated trace / IDX files and unreadable paths.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, solver non-convergence, degenerate fits.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A sample carries no information for the requested test (all values equal,
/// zero variance, too few positive magnitudes).
class DegenerateSampleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace gradspec
