#pragma once

#include <stdexcept>
#include <string>

namespace anoflow {

// Bad flags, bad indices, API misuse. CLI exit code 1.
class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable or malformed input data, incompatible model/data. CLI exit code 2.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf escaping a computation, divergence. CLI exit code 3.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatch between tensors. A programming error in callers, not user input.
class DimensionError : public std::logic_error {
public:
  explicit DimensionError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace anoflow
