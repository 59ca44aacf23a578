#pragma once

#include <stdexcept>
#include <string>

namespace sensekern {

// Caller violated a precondition (bad arguments, mismatched shapes, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data is malformed or numerically unusable.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration resource (stoplist, vocabulary file, ...) is missing or unreadable.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Process exit codes used by the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

}  // namespace sensekern
