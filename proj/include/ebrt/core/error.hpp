#pragma once

#include <stdexcept>
#include <string>

namespace ebrt {

/// Base class for every error raised by the simulator library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad value, bad shape, out of range).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A triangle with (near) zero area was handed to a primitive that requires a proper one.
class DegenerateTriangle : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// A referenced id (machine, component, attachment, session, file) does not exist.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// The operation conflicts with current state (e.g. attaching an id twice).
class Conflict : public Error {
 public:
  using Error::Error;
};

/// A file or payload could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ebrt
