#pragma once

#include <stdexcept>
#include <string>

namespace ramtsf {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape / axis mismatches.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid argument values (temperature <= 0, dropout rate out of range, ...).
struct ValueError : Error {
  using Error::Error;
};

// API misuse: double backward, backward through an untaped tensor,
// instrumentation queried while disabled.
struct StateError : Error {
  using Error::Error;
};

// An op produced NaN or Inf; these are error states, never values.
struct NotFiniteError : Error {
  using Error::Error;
};

// Dataset / CSV problems (malformed rows, bad timestamps, empty splits).
struct DataError : Error {
  using Error::Error;
};

// Adjacency problems (negative weights, zero-degree node under normalization).
struct GraphError : Error {
  using Error::Error;
};

// Experiment / model configuration problems (unknown keys, invalid values).
struct ConfigError : Error {
  using Error::Error;
};

// File I/O failures (missing file, bad checkpoint magic).
struct IoError : Error {
  using Error::Error;
};

}  // namespace ramtsf
