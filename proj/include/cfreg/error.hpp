#pragma once

#include <stdexcept>
#include <string>

namespace cfreg {

// Error categories map one-to-one onto the CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition (bad k, empty input, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Filesystem or stream failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// File content does not parse. The message carries the line or byte offset.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

// Geometry or weights that admit no meaningful solution.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

}  // namespace cfreg
