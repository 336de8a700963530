#pragma once

#include <stdexcept>
#include <string>

namespace ppdl {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the operation's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Exact integer result does not fit the count representation.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Operation called on an object in the wrong state (e.g. an unplayed arm).
class StateError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Secret-sharing contract violation (too few shares, duplicate points).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Not enough group members survived to reconstruct an aggregate.
class AggregationFailure : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ppdl
