// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace optm {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor dimensions do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (flags, config files, degenerate statistics).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value produced during a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Operation called on an object in the wrong state.
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace optm
