#pragma once

#include <stdexcept>
#include <string>

namespace polsar {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable file, or a failed write.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input data that breaks a documented invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Arguments that are outside an operation's domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace polsar
