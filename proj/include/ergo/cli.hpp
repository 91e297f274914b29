#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ergo/types.hpp"

namespace ergo::cli {

// A command line saved as data: `ergo --config run.json` replays it.
struct ExperimentConfig {
  std::string command;
  std::vector<std::string> arguments;  // positional, e.g. the model kind or reproduce target
  std::optional<std::string> chain;
  std::optional<std::variant<std::string, std::vector<double>>> functional;  // CSV path or inline values
  nlohmann::json params = nlohmann::json::object();                        // flag name -> value
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::string format = "json";

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
std::vector<std::string> to_arguments(const ExperimentConfig& config);

// Exit codes: 0 success, 1 module error (error JSON on err) or failed
// reproduce target, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ergo::cli
