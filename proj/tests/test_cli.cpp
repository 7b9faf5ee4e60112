#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(MOLBAT_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(st));
  return WEXITSTATUS(st);
}

std::string write_config(const std::string& name, const std::string& text) {
  fs::create_directories("cli_cfg");
  const std::string path = "cli_cfg/" + name + ".json";
  std::ofstream(path) << text;
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const char* kSmall = R"({"version": 1, "scenario": "ergotropy", "battery": {"N": 30},
  "sweep": [{"parameter": "battery.delta_mu", "values": [0.9, 1.1]}]})";

}  // namespace

TEST_CASE("exit code 0 and output files") {
  fs::remove_all("cli_ok");
  const std::string cfg = write_config("small", kSmall);
  CHECK(run("simulate " + cfg + " --out cli_ok --verify") == 0);
  CHECK(fs::exists("cli_ok/small.csv"));
  CHECK(fs::exists("cli_ok/small.timings.csv"));
  CHECK(run("simulate " + cfg + " --out cli_ok --format json --threads 2") == 0);
  CHECK(slurp("cli_ok/small.json").rfind("[\n", 0) == 0);
}

TEST_CASE("exit code 2 on configuration errors, nothing written") {
  fs::remove_all("cli_bad");
  const std::string bad = write_config("bad", R"({"version": 1, "scenario": "ergotropy", "batery": {}})");
  CHECK(run("simulate " + bad + " --out cli_bad") == 2);
  CHECK_FALSE(fs::exists("cli_bad"));
  CHECK(run("simulate cli_cfg/missing.json --out cli_bad") == 2);
  const std::string broken = write_config("broken", "{\"version\": 1,");
  CHECK(run("simulate " + broken + " --out cli_bad") == 2);
  CHECK(run("simulate " + write_config("small", kSmall) + " --format xml") == 2);
  CHECK_FALSE(fs::exists("cli_bad"));
}

TEST_CASE("exit code 2 on an unwritable output directory") {
  std::ofstream("cli_blocker") << "file, not a directory";
  CHECK(run("simulate " + write_config("small", kSmall) + " --out cli_blocker/sub") == 2);
}

TEST_CASE("exit code 1 when a record fails") {
  const std::string cfg = write_config("strict", R"({"version": 1, "scenario": "battery-steady",
    "tolerances": {"stationary_trace_distance": 1e-300}, "battery": {"N": 30}})");
  CHECK(run("simulate " + cfg + " --out cli_strict") == 0);
  CHECK(run("simulate " + cfg + " --out cli_strict --verify") == 1);
  CHECK(slurp("cli_strict/strict.csv").find("verify-failed") != std::string::npos);
}

TEST_CASE("repeated runs give byte-identical csv") {
  const std::string cfg = write_config("small", kSmall);
  REQUIRE(run("simulate " + cfg + " --out cli_det_a --verify --threads 2") == 0);
  REQUIRE(run("simulate " + cfg + " --out cli_det_b --verify --threads 1") == 0);
  CHECK(slurp("cli_det_a/small.csv") == slurp("cli_det_b/small.csv"));
}
