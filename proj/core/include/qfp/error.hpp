#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qfp {

enum class ErrorCode {
  kInputTooSmall,
  kCapacityExceeded,
  kDomainError,
  kMissingLabels,
  kBudgetInfeasible,
  kUnsupportedFormat,
  kMalformedData,
  kInvalidConfig,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this exception type; `code()`
// distinguishes them so callers (the CLI in particular) can map them to exit
// statuses without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qfp
