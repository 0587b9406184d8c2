#pragma once

#include <stdexcept>
#include <string>

namespace hge {

// Error taxonomy shared by all modules. The CLI maps ValidationError (and
// subclasses) to exit code 2 and NumericError to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; carries the 1-based line number when known.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& file, long line, const std::string& what)
      : ValidationError(file + ":" + std::to_string(line) + ": " + what) {}
  explicit ParseError(const std::string& what) : ValidationError(what) {}
};

// An id refers to something that does not exist (e.g. dangling edge endpoint).
class ReferenceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Tensor shape mismatch; construct via shape_error() so both shapes are named.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A caller violated an operation's contract (empty neighbor list, etc).
class ContractError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// NaN/Inf reached an op boundary, or training diverged.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IncompatibilityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace hge
