#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace polyct {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  not_power_of_two,
  numerical_failure,
  budget_overflow,
  nonconvergence,
  config_error,
  io_error,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the library; the code distinguishes failure
// classes so callers (the CLI in particular) can map them to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<std::int64_t> iteration = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  // Iteration index at which an iterative method failed, when applicable.
  std::optional<std::int64_t> iteration() const noexcept { return iteration_; }

 private:
  ErrorCode code_;
  std::optional<std::int64_t> iteration_;
};

}  // namespace polyct
