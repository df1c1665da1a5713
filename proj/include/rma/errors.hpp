#pragma once

#include <stdexcept>
#include <string>

namespace rma {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A configuration knob is out of range or inconsistent with another.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked out of protocol (e.g. empty inputs).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A label vector that cannot be normalized into a distribution.
class InvalidSampleError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Dataset files missing or malformed.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace rma
