#pragma once

#include <stdexcept>
#include <string>

namespace fibm {

/// Malformed or inconsistent input data (edge lists, community files, index dumps).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration or CLI usage.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A validation check exceeded its tolerance.
class ValidationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fibm
