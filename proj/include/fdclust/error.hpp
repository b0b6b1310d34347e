#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fdclust {

/// Failure categories surfaced by the library. The CLI maps each category to
/// an exit code (see `exit_code`).
enum class ErrorCode {
  // configuration
  invalid_argument,
  // data / file
  malformed_number,
  ragged_row,
  non_increasing_grid,
  empty_file,
  non_finite_value,
  length_mismatch,
  io_failure,
  schema_mismatch,
  version_mismatch,
  kind_mismatch,
  grid_mismatch,
  degenerate_data,
  // numeric
  optimizer_failed,
  eigen_failure,
  rank_deficient,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::malformed_number: return "malformed-number";
    case ErrorCode::ragged_row: return "ragged-row";
    case ErrorCode::non_increasing_grid: return "non-increasing-grid";
    case ErrorCode::empty_file: return "empty-file";
    case ErrorCode::non_finite_value: return "non-finite-value";
    case ErrorCode::length_mismatch: return "length-mismatch";
    case ErrorCode::io_failure: return "io-failure";
    case ErrorCode::schema_mismatch: return "schema-mismatch";
    case ErrorCode::version_mismatch: return "version-mismatch";
    case ErrorCode::kind_mismatch: return "kind-mismatch";
    case ErrorCode::grid_mismatch: return "grid-mismatch";
    case ErrorCode::degenerate_data: return "degenerate-data";
    case ErrorCode::optimizer_failed: return "optimizer-failed";
    case ErrorCode::eigen_failure: return "eigen-failure";
    case ErrorCode::rank_deficient: return "rank-deficient";
  }
  return "unknown";
}

/// Exception carrying a machine-readable code. The message is prefixed with
/// the module that raised it, e.g. "dataio: ragged-row at row 3 ...".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string_view module, const std::string& detail)
      : std::runtime_error(std::string(module) + ": " + std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Process exit code for a failure: 2 configuration, 3 data, 4 numeric.
constexpr int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
      return 2;
    case ErrorCode::optimizer_failed:
    case ErrorCode::eigen_failure:
    case ErrorCode::rank_deficient:
      return 4;
    default:
      return 3;
  }
}

}  // namespace fdclust
