#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace maglab {

/// Coarse error category; the CLI maps these onto exit codes.
enum class ErrorCategory { validation, numerical, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// A caller-side contract was violated (bad sizes, invalid grids, ...).
class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what)
      : Error(ErrorCategory::validation, what) {}
};

/// A requested evaluation lies outside tabulated or covered ranges.
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what)
      : Error(ErrorCategory::validation, what) {}
};

/// Configuration documents that fail to parse or validate.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::validation, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorCategory::numerical, what) {}
};

/// Iterative method hit its cap or stagnated. Carries the best residuals seen.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best_residuals)
      : NumericalError(what), best_residuals_(std::move(best_residuals)) {}

  const std::vector<double>& best_residuals() const noexcept {
    return best_residuals_;
  }

 private:
  std::vector<double> best_residuals_;
};

class DegeneracyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BracketError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ResolutionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

}  // namespace maglab
