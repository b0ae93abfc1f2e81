#pragma once

#include <stdexcept>
#include <string>

namespace otmetrics {

// Error classes double as the CLI's stable exit codes.
enum class ErrorClass : int {
  kIo = 1,
  kSchema = 2,
  kNumeric = 3,
  kUsage = 64,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass error_class, std::string code, const std::string& message)
      : std::runtime_error(message), error_class_(error_class), code_(std::move(code)) {}

  ErrorClass error_class() const noexcept { return error_class_; }
  // Short machine-readable name, e.g. "DimensionMismatch".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorClass error_class_;
  std::string code_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorClass::kIo, "IoError", message) {}
};

// A configuration value violates its documented invariant.
class InvalidConfig : public Error {
 public:
  explicit InvalidConfig(const std::string& message)
      : Error(ErrorClass::kUsage, "InvalidConfig", message) {}
};

}  // namespace otmetrics
