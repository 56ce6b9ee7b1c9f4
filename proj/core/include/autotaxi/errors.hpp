#pragma once

#include <stdexcept>
#include <string>

namespace autotaxi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state or input contained a non-finite value.
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// A caller violated an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A scenario file or override failed schema validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required file or run artifact does not exist.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// A linear system or optimization problem could not be solved.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace autotaxi
