// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace wsa {

// Base of every error raised by the engine. The CLI maps the subclasses onto
// stable exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or model geometry that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values (odd window, zero bands, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File system and file-format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where finite values are required, fully masked softmax rows.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace wsa
