#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "ergo/io.hpp"
#include "ergo/models.hpp"
#include "testing.hpp"

using namespace ergo;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / ("ergo_io_test_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("chain JSON round trip") {
  const ModelInstance m = doeblin_example();
  const ChainDefinition def = definition_of(m.chain, m.raw);
  const json j = chain_to_json(def);
  CHECK(j.at("schema_version") == 1);
  CHECK(j.at("kernel").size() == 5);
  const ChainDefinition back = chain_from_json(j);
  CHECK(back.kernel == def.kernel);
  CHECK(back.states == def.states);
  REQUIRE(back.functional.has_value());
  CHECK(*back.functional == m.raw);

  const auto path = scratch_dir() / "chain.json";
  write_chain_file(path, def);
  const ChainDefinition file = read_chain_file(path);
  CHECK(file.kernel == def.kernel);  // 17 significant digits survive the text form
  CHECK(*file.functional == m.raw);
  std::filesystem::remove(path);
}

TEST_CASE("chain JSON input rules") {
  const json minimal = {{"kernel", {{0.5, 0.5}, {0.2, 0.8}}}};
  SUBCASE("schema_version and functional are optional") {
    const ChainDefinition def = chain_from_json(minimal);
    CHECK(def.kernel(1, 1) == 0.8);
    CHECK_FALSE(def.functional.has_value());
    CHECK(def.states.empty());
  }
  SUBCASE("unknown fields are rejected") {
    json j = minimal;
    j["kernal"] = 1;
    try {
      chain_from_json(j);
      FAIL("expected rejection");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidArgument);
      CHECK(e.detail().at("field") == "kernal");
    }
  }
  SUBCASE("wrong schema version") {
    json j = minimal;
    j["schema_version"] = 2;
    CHECK(code_of([&] { chain_from_json(j); }) == ErrorCode::InvalidArgument);
  }
  SUBCASE("shape errors") {
    CHECK(code_of([] { chain_from_json(json{{"kernel", {{1.0}, {0.5, 0.5}}}}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { chain_from_json(json{{"kernel", {{0.5, 0.5}, {0.5, 0.5}}}, {"functional", {1.0}}}); }) ==
          ErrorCode::InvalidArgument);
    CHECK(code_of([] { chain_from_json(json{{"kernel", {{0.5, "x"}, {0.5, 0.5}}}}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([] { chain_from_json(json::array()); }) == ErrorCode::InvalidArgument);
  }
  SUBCASE("a parsed kernel still goes through validation") {
    const ChainDefinition def = chain_from_json(json{{"kernel", {{0.5, 0.4}, {0.2, 0.8}}}});
    CHECK(code_of([&] { validate_kernel(def.kernel); }) == ErrorCode::RowSum);
  }
}

TEST_CASE("functional CSV") {
  const std::vector<std::string> states{"idle", "busy", "down"};
  Vector v(3);
  v << 0.1, -2.5, 1.0 / 3;
  const std::string text = vector_to_csv(states, v);
  CHECK(text.rfind("# schema_version=1\nstate,value\nidle,0.10000000000000001\n", 0) == 0);
  CHECK(vector_from_csv(text, states) == v);

  SUBCASE("rows may come in any order, with CRLF line ends") {
    const Vector w = vector_from_csv("state,value\r\ndown,3\r\nidle,1\r\nbusy,2\r\n", states);
    CHECK(w(0) == 1.0);
    CHECK(w(2) == 3.0);
  }
  SUBCASE("errors") {
    CHECK(code_of([&] { vector_from_csv("name,value\nidle,1\n", states); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { vector_from_csv("state,value\nidle,1\nbusy,2\n", states); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { vector_from_csv("state,value\nidle,1\nbusy,2\nnope,3\n", states); }) ==
          ErrorCode::InvalidArgument);
    CHECK(code_of([&] { vector_from_csv("state,value\nidle,one\n", states); }) == ErrorCode::InvalidArgument);
  }
  SUBCASE("file form") {
    const auto path = scratch_dir() / "f.csv";
    std::ofstream(path) << text;
    CHECK(read_vector_file(path, states) == v);
    std::filesystem::remove(path);
  }
}

TEST_CASE("error JSON shape") {
  const Error e(ErrorCode::RowSum, "row 0 sums to 0.9", {{"row", 0}});
  const json j = e.to_json();
  CHECK(j.at("error") == "RowSumError");
  CHECK(j.at("message") == "row 0 sums to 0.9");
  CHECK(j.at("detail").at("row") == 0);
}

TEST_CASE("vector JSON") {
  Vector v(2);
  v << 1.5, -0.25;
  CHECK(to_json(v) == json::array({1.5, -0.25}));
  CHECK(vector_from_json(json::array({1.5, -0.25})) == v);
  CHECK(code_of([] { vector_from_json(json{{"a", 1}}); }) == ErrorCode::InvalidArgument);
}
