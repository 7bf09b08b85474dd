#pragma once

#include <stdexcept>
#include <string>

namespace drowsy {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A rectangle, pixel or index fell outside the data it addresses.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Malformed arguments or inputs that violate a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A learner could not produce a model from the data it was given.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Model or image file could not be read or parsed.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent pipeline configuration, detected before streaming.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace drowsy
