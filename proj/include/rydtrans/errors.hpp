#pragma once

#include <stdexcept>
#include <string>

namespace rydtrans {

// Bad input: unreadable files, malformed values, violated invariants.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation that cannot produce a meaningful number.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Nonphysical arguments (n - delta <= 0, missing series, ...).
class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace rydtrans
