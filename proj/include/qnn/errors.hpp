#pragma once

#include <stdexcept>
#include <string>

namespace qnn {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or sequence shapes.
struct ShapeError : Error {
  using Error::Error;
};

/// An input that is numerically degenerate (zero norm, empty sequence, ...).
struct DegenerateInputError : Error {
  using Error::Error;
};

/// An unrecognized identifier (activation name, loss kind, layer kind, ...).
struct UnknownIdError : Error {
  using Error::Error;
};

/// Invalid configuration value.
struct ConfigError : Error {
  using Error::Error;
};

/// File I/O errors. The three format failures are distinct types so callers
/// can tell a wrong file apart from a damaged one.
struct IoError : Error {
  using Error::Error;
};
struct MagicMismatchError : IoError {
  using IoError::IoError;
};
struct TruncatedFileError : IoError {
  using IoError::IoError;
};
struct VersionMismatchError : IoError {
  using IoError::IoError;
};

}  // namespace qnn
