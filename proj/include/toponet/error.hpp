#pragma once

#include <stdexcept>
#include <string>

namespace toponet {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Two grids that must agree in shape do not.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A value lies outside its admissible range (likelihoods outside [0,1],
/// labels above the declared category count, non-finite reals).
class RangeError : public Error {
public:
  using Error::Error;
};

/// Malformed file header or magic bytes.
class FormatError : public Error {
public:
  using Error::Error;
};

/// File ended before the declared payload was read.
class TruncationError : public Error {
public:
  using Error::Error;
};

/// Could not open/read/write a path.
class IoError : public Error {
public:
  using Error::Error;
};

/// Caller passed an argument violating a documented precondition.
class ArgumentError : public Error {
public:
  using Error::Error;
};

}  // namespace toponet
