#pragma once

#include <stdexcept>
#include <string>

namespace rgdno {

// Bad inputs: malformed files, inconsistent shapes, invalid parameters.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures at run time: diverging optimizations, non-finite values,
// unreachable endpoints. The CLI maps this to exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rgdno
