#pragma once

#include <stdexcept>
#include <string>

namespace thinstruct {

// Numeric values double as CLI exit codes and C API status codes.
enum class ErrorCode : int {
  internal = 1,
  invalid_input = 2,  // unreadable files, bad dimensions, bad configuration
  numerical = 3,      // solver breakdown, NaN residuals
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorCode::invalid_input, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCode::numerical, what) {}
};

}  // namespace thinstruct
