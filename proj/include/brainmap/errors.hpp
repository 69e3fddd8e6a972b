#pragma once

#include <stdexcept>
#include <string>

namespace brainmap {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch between operands.
struct ShapeError : Error {
  using Error::Error;
};

/// Caller violated a documented precondition.
struct ContractError : Error {
  using Error::Error;
};

/// Invalid or inconsistent configuration value.
struct ConfigError : Error {
  using Error::Error;
};

/// Iterative numerical routine failed to converge.
struct NumericalError : Error {
  using Error::Error;
};

/// File-level I/O failure (open, read, write, parse).
struct IoError : Error {
  using Error::Error;
};

/// A file named in a manifest does not exist.
struct MissingFileError : IoError {
  using IoError::IoError;
};

/// Adjacency matrix is not symmetric within tolerance.
struct AsymmetryError : Error {
  using Error::Error;
};

/// Subject label outside the declared class range.
struct LabelRangeError : Error {
  using Error::Error;
};

}  // namespace brainmap
