#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string capture = "test_cli_stdout.txt";
  const std::string cmd = std::string(M2D_CLI_PATH) + " " + args + " > " + capture + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(capture);
  std::stringstream ss;
  ss << is.rdbuf();
  r.out = ss.str();
  std::filesystem::remove(capture);
  return r;
}

}  // namespace

TEST_CASE("CLI exit codes") {
  CHECK(run("sharpness --pair 0,2,inf,3").code == 2);
  CHECK(run("nope").code == 2);
  CHECK(run("").code == 2);
  CHECK(run("kerr --seed minus").code == 2);
  CHECK(run("sharpness --lambda-list 16,48 --print-config").code == 2);
  CHECK(run("kerr --config does_not_exist.json").code == 2);
  CHECK(run("kerr --bogus-flag").code == 2);
  CHECK(run("--help").code == 0);
  const Run list = run("--list-checks");
  CHECK(list.code == 0);
  CHECK(list.out.find("sharpness.exponents") != std::string::npos);
}

TEST_CASE("CLI flags override the config file") {
  const std::string path = "test_cli_config.json";
  std::ofstream(path) << R"({"experiment": "diag-check", "seed": 3, "lambda_list": [16], "params": {"samples": 300}})";
  const Run p = run("diag-check --config " + path + " --seed 11 --lambda-list 32,64 --pair 0.75,4,inf,2 --print-config");
  REQUIRE(p.code == 0);
  const auto j = nlohmann::json::parse(p.out);
  CHECK(j["seed"] == 11);
  CHECK(j["lambda_list"] == nlohmann::json{32.0, 64.0});
  CHECK(j["params"]["samples"] == 300);
  CHECK(run("kerr --config " + path).code == 2);

  const std::string out = "test_cli_out";
  std::filesystem::remove_all(out);
  const Run r = run("diag-check --config " + path + " --out " + out);
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(std::filesystem::exists(out + "/report.json"));
  CHECK(std::filesystem::exists(out + "/diag.exact_diagonalization.csv"));
  std::filesystem::remove_all(out);

  // A check that raises inside a module is a runtime error.
  std::ofstream(path) << R"({"experiment": "fbi-check", "lambda_list": [16], "out": "",
                             "params": {"inputs": 1, "isometry_lambdas": [16]}})";
  CHECK(run("fbi-check --config " + path).code == 3);
  std::filesystem::remove(path);
}
