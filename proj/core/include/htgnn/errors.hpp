#pragma once

#include <stdexcept>
#include <string>

namespace htgnn {

/// Base of every error raised by the library. Callers that only need to
/// report a failure can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (hyperparameters, window sizes, variant flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Reference to an unknown node type or relation type.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a structural invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. The message carries the file and line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace htgnn
