#include "ergo/error.hpp"

#include "ergo/types.hpp"

namespace ergo {

const Settings& default_settings() {
  static const Settings settings{};
  return settings;
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RowSum: return "RowSumError";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::Reducible: return "Reducible";
    case ErrorCode::NotAperiodic: return "NotAperiodic";
    case ErrorCode::V4Violation: return "V4Violation";
    case ErrorCode::Domain: return "DomainError";
    case ErrorCode::Numerical: return "NumericalError";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::GapTooSmall: return "GapTooSmall";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::Inconsistent: return "Inconsistent";
    case ErrorCode::LatticeFunctional: return "LatticeFunctional";
    case ErrorCode::NonLatticeFunctional: return "NonLatticeFunctional";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::UnstableQueue: return "UnstableQueue";
    case ErrorCode::LinearRegime: return "LinearRegime";
    case ErrorCode::Io: return "IoError";
  }
  return "Unknown";
}

nlohmann::json Error::to_json() const {
  return {{"error", std::string(to_string(code_))}, {"message", what()}, {"detail", detail_}};
}

}  // namespace ergo
