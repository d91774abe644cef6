#pragma once

#include <stdexcept>
#include <string>

namespace spinodoid {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user input: configuration, parameter bounds, file schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Malformed file contents; the message names the offending field.
class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Solver breakdown, divergence, or a degenerate numerical state.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace spinodoid
