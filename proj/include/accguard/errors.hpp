#pragma once

#include <stdexcept>
#include <string>

namespace accguard {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// ConfigError/DataError -> 2, IoError -> 3, NumericError -> 4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when NaN/Inf shows up where the math should have stayed finite.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/axis mismatches.
struct ShapeError : std::invalid_argument {
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// API called in an order its contract forbids (e.g. empty history lookup).
struct StateError : std::logic_error {
  explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace accguard
