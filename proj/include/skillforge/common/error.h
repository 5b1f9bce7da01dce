#pragma once

#include <stdexcept>
#include <string>

namespace skillforge {

enum class ErrorKind {
  kInvalidInput,
  kNumerical,
};

// Base exception for all library failures. The kind decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const {
    return kind_;
  }

 private:
  ErrorKind kind_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& message)
      : Error(ErrorKind::kInvalidInput, message) {}
};

class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& message, std::string checkpoint = {})
      : Error(ErrorKind::kNumerical, message), checkpoint_(std::move(checkpoint)) {}

  // Path of the last finite checkpoint written before the failure, if any.
  const std::string& checkpoint() const {
    return checkpoint_;
  }

 private:
  std::string checkpoint_;
};

inline void throwIf(bool condition, const std::string& message) {
  if (condition) {
    throw InvalidInput(message);
  }
}

}  // namespace skillforge
