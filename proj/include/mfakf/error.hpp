// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfakf {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Incompatible operand shapes. The message names the offending pair.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Bad scalar content (NaN/Inf on construction, invalid parameter values).
class ValueError : public Error {
public:
  using Error::Error;
};

/// A pivot or triangular diagonal too small to divide by.
class SingularError : public Error {
public:
  SingularError(const std::string& msg, std::size_t index, double magnitude)
      : Error(msg), index(index), magnitude(magnitude) {}
  std::size_t index;
  double magnitude;
};

/// File or stream problems: missing paths, malformed content.
class IoError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration (JSON configs, scenario files, CLI manifests).
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace mfakf
