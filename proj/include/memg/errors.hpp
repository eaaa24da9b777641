#pragma once

#include <stdexcept>
#include <string>

namespace memg {

// Failure categories, doubling as CLI exit codes.
enum class ErrorCategory : int {
  usage = 2,    // bad arguments or an invalid configuration
  format = 3,   // malformed or inconsistent input files
  numeric = 4,  // numerical failure during fitting or evaluation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorCategory::format, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

// Normal-equation solve failed even after the rank-revealing fallback.
// The optimizer catches this and retries with stronger damping.
struct SingularSystemError : NumericError {
  explicit SingularSystemError(const std::string& what) : NumericError(what) {}
};

// Detection found nothing above threshold. Callers may lower tau and retry.
struct NoComponentsError : NumericError {
  explicit NoComponentsError(const std::string& what) : NumericError(what) {}
};

// Training set holds a single class; no classifier can be grown from it.
struct DegenerateTrainingError : NumericError {
  explicit DegenerateTrainingError(const std::string& what) : NumericError(what) {}
};

// A requested train/test partition left one side empty.
struct SplitError : UsageError {
  explicit SplitError(const std::string& what) : UsageError(what) {}
};

}  // namespace memg
