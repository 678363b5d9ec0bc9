// End-to-end checks of the installed binary. The test runner passes the
// binary path through MMSTENCIL_BIN.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace {

std::string binary() {
  const char* p = std::getenv("MMSTENCIL_BIN");
  REQUIRE_MESSAGE(p != nullptr, "MMSTENCIL_BIN must point at the bench binary");
  return std::string("\"") + p + "\"";
}

int run(const std::string& args, const std::string& out_file = "cli_out.txt") {
  const std::string cmd = binary() + " " + args + " > " + out_file + " 2> cli_err.txt";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

}  // namespace

TEST_CASE("help exits cleanly") {
  CHECK(run("--help") == 0);
  CHECK(run("bench --help") == 0);
}

TEST_CASE("bench json output") {
  REQUIRE(run("bench --kernel 3dstar_r2 --grid 32,32,8 --verify") == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp("cli_out.txt"));
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 1);
  const auto& row = j[0];
  CHECK(row["config"]["kernel"] == "3dstar_r2");
  CHECK(row["config"]["precision"] == "f32");
  CHECK(row["config"]["grid"] == nlohmann::json::array({32, 32, 8}));
  CHECK(row["result"]["blocks"] == 2 * 2 * 2);
  CHECK(row["result"]["verified"] == true);
  CHECK(row["result"]["max_error"].get<double>() <
        row["result"]["tolerance"].get<double>());
  CHECK(row["result"].contains("emulated_wall_seconds"));
  CHECK(row["result"]["traffic"]["mainmem_lines_read"].get<long>() > 0);
}

TEST_CASE("bench csv output is versioned and timing-off runs are reproducible") {
  REQUIRE(run("bench --kernel 2dstar_r2 --grid 64,64,1 --format csv --timing off",
              "cli_a.csv") == 0);
  const std::string a = slurp("cli_a.csv");
  CHECK(a.rfind("# mmstencil-bench-csv v1", 0) == 0);
  CHECK(a.find("kernel,precision,layout,workers") != std::string::npos);
  REQUIRE(run("bench --kernel 2dstar_r2 --grid 64,64,1 --format csv --timing off",
              "cli_b.csv") == 0);
  CHECK(a == slurp("cli_b.csv"));
}

TEST_CASE("bench rejects bad usage") {
  CHECK(run("bench --no-such-flag") == 2);
  CHECK(run("bench --kernel 9dstar") == 2);
  CHECK(run("bench --kernel 3dstar_r2 --grid 33,32,8") == 2);  // not tileable
  CHECK(run("bench --kernel 3dstar_r2 --precision f16") == 2);
  CHECK(run("frobnicate") == 2);
}

TEST_CASE("verify reports and fails on injected errors") {
  REQUIRE(run("verify --kernel 3dstar_r2 --grid 32,32,8") == 0);
  std::string out = slurp("cli_out.txt");
  CHECK(out.find("kernel 3dstar_r2: OK") != std::string::npos);

  REQUIRE(run("verify --kernel 3dstar_r2 --grid 32,32,8 --inject-error") == 1);
  out = slurp("cli_out.txt");
  CHECK(out.find("FAIL") != std::string::npos);
}

TEST_CASE("analyze json covers every kernel") {
  REQUIRE(run("analyze") == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp("cli_out.txt"));
  REQUIRE(j["kernels"].size() == 8);
  CHECK(j["machine"]["vector_length"] == 16);
  bool saw = false;
  for (const auto& k : j["kernels"]) {
    CHECK(k.contains("matrix_speedup"));
    CHECK(k.contains("roofline"));
    if (k["kernel"] == "3dstar_r4") {
      saw = true;
      CHECK(k["matrix_speedup"]["num"] == 3);
      CHECK(k["matrix_speedup"]["den"] == 2);
      CHECK(k["streams_flat"] == 224);
      CHECK(k["streams_brick"] == 14);
      CHECK(k["roofline"]["class"] == "memory-bound");
    }
  }
  CHECK(saw);

  REQUIRE(run("analyze --format csv", "cli_an.csv") == 0);
  CHECK(slurp("cli_an.csv").rfind("# mmstencil-analyze-csv v1", 0) == 0);
}

TEST_CASE("rtm runs from a config file") {
  spit("cli_rtm.json",
       "{\"grid\": [32, 32, 16], \"steps\": 2, \"source\": {\"f0\": 25}}");
  REQUIRE(run("rtm --config cli_rtm.json") == 0);
  nlohmann::json j = nlohmann::json::parse(slurp("cli_out.txt"));
  CHECK(j["config"]["medium"] == "vti");
  CHECK(j["report"]["steps"] == 2);
  CHECK(j["report"]["dt_within_limit"] == true);
  CHECK(j["report"]["max_abs_field"].get<double>() > 0.0);
  CHECK(j["report"].contains("emulated_wall_seconds"));

  // Overrides and deterministic timing-off output.
  REQUIRE(run("rtm --config cli_rtm.json --steps 1 --timing off", "cli_r1.json") == 0);
  j = nlohmann::json::parse(slurp("cli_r1.json"));
  CHECK(j["report"]["steps"] == 1);
  CHECK(j["config"]["steps"] == 1);  // echoed config reflects the override
  CHECK_FALSE(j["report"].contains("emulated_wall_seconds"));
  REQUIRE(run("rtm --config cli_rtm.json --steps 1 --timing off", "cli_r2.json") == 0);
  CHECK(slurp("cli_r1.json") == slurp("cli_r2.json"));

  // Decomposed run through the flag syntax.
  REQUIRE(run("rtm --config cli_rtm.json --decomp 1,1,2 --pipeline-layers 2") == 0);
  j = nlohmann::json::parse(slurp("cli_out.txt"));
  CHECK(j["config"]["decomp"]["proc"] == nlohmann::json::array({1, 1, 2}));

  CHECK(run("rtm --config no_such_file.json") == 2);
  spit("cli_bad.json", "{\"medium\": \"elastic\"}");
  CHECK(run("rtm --config cli_bad.json") == 2);
  std::remove("cli_rtm.json");
  std::remove("cli_bad.json");
}
