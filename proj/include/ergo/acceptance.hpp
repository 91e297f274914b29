#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ergo {

struct CriterionReport {
  int id = 0;
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  double budget_seconds = 0.0;
  std::string summary;
  nlohmann::json numbers = nlohmann::json::object();
  nlohmann::json checks = nlohmann::json::array();  // [{check, value, bound, passed}]
};

// Names of the reproduce targets, one per acceptance criterion, in order.
const std::vector<std::string>& criterion_names();

// Runs one named experiment end to end. Deterministic: every random input
// uses an embedded seed. Exceeding the time budget fails the criterion.
CriterionReport run_criterion(std::string_view name);

nlohmann::json to_json(const CriterionReport& r);

}  // namespace ergo
