#pragma once

#include <stdexcept>
#include <string>

namespace qdm {

/// Invalid user input: bad parameters, malformed configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to deliver a trustworthy result.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientBoundStates : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace qdm
