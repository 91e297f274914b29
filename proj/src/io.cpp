#include "ergo/io.hpp"

#include <fstream>
#include <sstream>

#include "ergo/error.hpp"

namespace ergo {
namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open file", {{"path", path.string()}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write file", {{"path", path.string()}});
  out << text;
}

double number(const nlohmann::json& j, const char* what) {
  if (!j.is_number()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be numeric");
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], "vector entry");
  return v;
}

ChainDefinition chain_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "chain definition must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "schema_version" && key != "states" && key != "kernel" && key != "functional") {
      throw Error(ErrorCode::InvalidArgument, "unknown field in chain definition", {{"field", key}});
    }
  }
  if (j.contains("schema_version") && j["schema_version"] != kSchemaVersion) {
    throw Error(ErrorCode::InvalidArgument, "unsupported schema version", {{"schema_version", j["schema_version"]}});
  }
  if (!j.contains("kernel") || !j["kernel"].is_array()) {
    throw Error(ErrorCode::InvalidArgument, "chain definition needs a kernel matrix");
  }
  const auto& rows = j["kernel"];
  const auto n = static_cast<Eigen::Index>(rows.size());
  ChainDefinition def;
  def.kernel.resize(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw Error(ErrorCode::InvalidArgument, "kernel must be square", {{"row", r}});
    }
    for (Eigen::Index c = 0; c < n; ++c) def.kernel(r, c) = number(row[static_cast<std::size_t>(c)], "kernel entry");
  }
  if (j.contains("states")) {
    if (!j["states"].is_array() || static_cast<Eigen::Index>(j["states"].size()) != n) {
      throw Error(ErrorCode::InvalidArgument, "states must list one name per kernel row");
    }
    for (const auto& s : j["states"]) {
      def.states.push_back(s.is_string() ? s.get<std::string>() : s.dump());
    }
  }
  if (j.contains("functional")) {
    def.functional = vector_from_json(j["functional"]);
    if (def.functional->size() != n) {
      throw Error(ErrorCode::InvalidArgument, "functional must have one value per state");
    }
  }
  return def;
}

nlohmann::json chain_to_json(const ChainDefinition& def) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["states"] = def.states;
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < def.kernel.rows(); ++r) rows.push_back(to_json(def.kernel.row(r).transpose()));
  j["kernel"] = rows;
  if (def.functional) j["functional"] = to_json(*def.functional);
  return j;
}

ChainDefinition read_chain_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Io, "chain file is not valid JSON", {{"path", path.string()}, {"what", e.what()}});
  }
  return chain_from_json(j);
}

void write_chain_file(const std::filesystem::path& path, const ChainDefinition& def) {
  write_text(path, chain_to_json(def).dump(2) + "\n");
}

ChainDefinition definition_of(const ValidatedChain& chain, std::optional<Vector> functional) {
  return ChainDefinition{chain.names(), chain.kernel(), std::move(functional)};
}

std::string vector_to_csv(const std::vector<std::string>& states, const Vector& values) {
  std::ostringstream out;
  out.precision(17);
  out << "# schema_version=" << kSchemaVersion << "\n";
  out << "state,value\n";
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out << (idx < states.size() ? states[idx] : std::to_string(i)) << "," << values(i) << "\n";
  }
  return out.str();
}

Vector vector_from_csv(const std::string& text, const std::vector<std::string>& states) {
  Vector v = Vector::Constant(static_cast<Eigen::Index>(states.size()), std::nan(""));
  std::istringstream in(text);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "state,value") {
        throw Error(ErrorCode::InvalidArgument, "CSV header must be state,value", {{"header", line}});
      }
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::InvalidArgument, "malformed CSV row", {{"row", line}});
    const std::string name = line.substr(0, comma);
    const auto it = std::find(states.begin(), states.end(), name);
    if (it == states.end()) throw Error(ErrorCode::InvalidArgument, "unknown state in CSV", {{"state", name}});
    try {
      v(it - states.begin()) = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "CSV value is not numeric", {{"row", line}});
    }
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v(i))) {
      throw Error(ErrorCode::InvalidArgument, "CSV is missing a state", {{"state", states[static_cast<std::size_t>(i)]}});
    }
  }
  return v;
}

Vector read_vector_file(const std::filesystem::path& path, const std::vector<std::string>& states) {
  return vector_from_csv(read_text(path), states);
}

}  // namespace ergo
