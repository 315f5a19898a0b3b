#include "polyct/error.hpp"

namespace polyct {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::not_power_of_two: return "dimension-not-power-of-two";
    case ErrorCode::numerical_failure: return "numerical-failure";
    case ErrorCode::budget_overflow: return "budget-overflow";
    case ErrorCode::nonconvergence: return "nonconvergence";
    case ErrorCode::config_error: return "config-error";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what,
             std::optional<std::int64_t> iteration)
    : std::runtime_error(std::string(to_string(code)) + ": " + what),
      code_(code),
      iteration_(iteration) {}

}  // namespace polyct
