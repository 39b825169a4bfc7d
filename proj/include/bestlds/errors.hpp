#pragma once

#include <stdexcept>
#include <string>

namespace bestlds {

/// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  kConfig = 2,
  kParameter = 3,
  kStability = 4,
  kDegenerate = 5,
  kNumerical = 6,
  kIo = 7,
  kConvergence = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Invalid user configuration (Hankel depth, trial lengths, flags).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kConfig, what) {}
};

/// Malformed model parameters (shapes, non-PSD covariances).
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(ErrorCategory::kParameter, what) {}
};

class StabilityError : public Error {
 public:
  explicit StabilityError(const std::string& what) : Error(ErrorCategory::kStability, what) {}
};

/// An output channel whose rate is saturated at 0 or 1.
class DegenerateChannelError : public Error {
 public:
  DegenerateChannelError(const std::string& what, int channel)
      : Error(ErrorCategory::kDegenerate, what), channel_(channel) {}
  int channel() const noexcept { return channel_; }

 private:
  int channel_;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::kNumerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(ErrorCategory::kConvergence, what) {}
};

}  // namespace bestlds
