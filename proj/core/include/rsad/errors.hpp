#pragma once

#include <stdexcept>
#include <string>

namespace rsad {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad settings: thresholds out of range, unknown keys, inconsistent counts.
struct ConfigError : Error {
  using Error::Error;
};

/// Bad data handed to an operation: shape mismatches, empty inputs.
struct InputError : Error {
  using Error::Error;
};

/// An episode shape the split cannot satisfy.
struct SamplingError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace rsad
