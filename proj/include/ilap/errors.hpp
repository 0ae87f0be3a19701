#pragma once

#include <stdexcept>
#include <string>

namespace ilap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or missing configuration value (unknown dataset, invalid field, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing or corrupt input file (datasets, checkpoints, weights).
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// The exposure schedule cannot be served from the available samples.
class SchedulingError : public Error {
 public:
  using Error::Error;
};

/// An internal state invariant was violated (e.g. an empty val bank).
class InvariantError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace ilap
