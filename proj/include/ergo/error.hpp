#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace ergo {

enum class ErrorCode {
  InvalidArgument,
  RowSum,
  NegativeEntry,
  Reducible,
  NotAperiodic,
  V4Violation,
  Domain,
  Numerical,
  DegenerateVariance,
  GapTooSmall,
  NonConvergence,
  Inconsistent,
  LatticeFunctional,
  NonLatticeFunctional,
  OutOfRange,
  BudgetExceeded,
  UnstableQueue,
  LinearRegime,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every module reports failures through this type. `detail` carries the
/// offending values (row index, computed sums, ...) so the CLI can emit
/// them as structured JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = nlohmann::json::object())
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

}  // namespace ergo
