#pragma once

#include <stdexcept>
#include <string>

namespace dbslam {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller supplied a value outside an operation's domain.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data read from a file.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (open, read, write).
class IoError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine hit a singular or degenerate configuration.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace dbslam
