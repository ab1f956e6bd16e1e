#pragma once

#include <stdexcept>
#include <string>

namespace ahip {

/// Base of every error raised by the engine. The CLI maps each family to
/// an exit code (see tools/ahip.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside an operation's contract (bad label, bad smoothing, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf observed in a forward, backward or optimizer step.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A path or bank references an entry that does not exist.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic, bad manifest line).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable or truncated file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad command line or configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace ahip
