#pragma once

#include <stdexcept>
#include <string>

namespace ciisod {

// Base of every error thrown by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, training or CLI configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Violated call precondition (e.g. backward() on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents: bad magic, truncation, unsupported encodings.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in a loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ciisod
