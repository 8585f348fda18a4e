#pragma once

#include <stdexcept>
#include <string>

namespace ebgcn {

// Error taxonomy mirrors the CLI exit codes: config -> 1, data -> 2,
// numeric/runtime -> 3.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ebgcn
