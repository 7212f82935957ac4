#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aep {

enum class ErrorCategory {
  shape,
  validation,
  contract,
  training,
  config,
  io,
  format,
  insufficient_sample,
};

std::string_view to_string(ErrorCategory category);

/// Base of every exception thrown by the library. The category is stable and
/// machine readable; the CLI maps it onto its exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error(ErrorCategory::shape, m) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error(ErrorCategory::validation, m) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& m) : Error(ErrorCategory::contract, m) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& m) : Error(ErrorCategory::training, m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorCategory::config, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorCategory::io, m) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& m) : Error(ErrorCategory::format, m) {}
};

class InsufficientSampleError : public Error {
 public:
  explicit InsufficientSampleError(const std::string& m)
      : Error(ErrorCategory::insufficient_sample, m) {}
};

}  // namespace aep
