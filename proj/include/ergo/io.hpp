#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ergo/chain.hpp"

namespace ergo {

inline constexpr int kSchemaVersion = 1;

// Chain file: {"schema_version": 1, "states": [...], "kernel": [[...]],
// "functional": [...]}. Unknown fields are rejected; schema_version and
// functional are optional on input.
struct ChainDefinition {
  std::vector<std::string> states;
  Matrix kernel;
  std::optional<Vector> functional;
};

ChainDefinition chain_from_json(const nlohmann::json& j);
nlohmann::json chain_to_json(const ChainDefinition& def);

ChainDefinition read_chain_file(const std::filesystem::path& path);
void write_chain_file(const std::filesystem::path& path, const ChainDefinition& def);

ChainDefinition definition_of(const ValidatedChain& chain, std::optional<Vector> functional = std::nullopt);

// "state,value" CSV preceded by a "# schema_version=1" line.
std::string vector_to_csv(const std::vector<std::string>& states, const Vector& values);
// Reads the same format; comment lines and the header are skipped.
Vector vector_from_csv(const std::string& text, const std::vector<std::string>& states);
Vector read_vector_file(const std::filesystem::path& path, const std::vector<std::string>& states);

nlohmann::json to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

}  // namespace ergo
