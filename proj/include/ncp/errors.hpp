#pragma once

#include <stdexcept>
#include <string>

namespace ncp {

// Exception families map one-to-one onto CLI exit codes.

/// Invalid configuration or arguments violating a documented precondition.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values or a degenerate numerical situation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read, written or parsed.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Enumeration would exceed the fixed size guard.
struct GuardError : ConfigError {
  using ConfigError::ConfigError;
};

}  // namespace ncp
