#include <cmath>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "maxwell2d/maxwell2d.h"

TEST_CASE("C API: registry and direct entry points") {
  CHECK(std::string(m2d_version()).size() > 0);
  CHECK(m2d_experiment_count() == 7);
  CHECK(m2d_experiment_id(99) == nullptr);
  CHECK(m2d_check_count() == 10);
  const char *id = nullptr, *exp = nullptr;
  int crit = 0;
  double budget = 0;
  CHECK(m2d_check_info(0, &id, &crit, &exp, &budget) == M2D_OK);
  CHECK(crit == 1);
  CHECK(m2d_check_info(10, &id, &crit, &exp, &budget) == M2D_INVALID_ARGUMENT);

  int cls = -1;
  CHECK(m2d_strichartz_classify(0.75, 4, INFINITY, 2, &cls) == M2D_OK);
  CHECK(cls == 0);
  CHECK(m2d_strichartz_classify(0, 2, INFINITY, 3, &cls) == M2D_OK);
  CHECK(cls == 2);
  double sigma = 0, delta = 0;
  CHECK(m2d_sigma_delta(2, &sigma, &delta) == M2D_OK);
  CHECK(sigma == 0.0);
  CHECK(delta == 0.5);
  CHECK(m2d_sigma_delta(3, &sigma, &delta) == M2D_INVALID_ARGUMENT);
  CHECK(std::string(m2d_last_error()).find("[0,2]") != std::string::npos);

  const double eps[3] = {2, 0.3, 1.5}, xi[3] = {0.4, 1, -2}, degenerate[3] = {1, 0, 0};
  double res = 1;
  CHECK(m2d_diagonalization_residual(eps, xi, &res) == M2D_OK);
  CHECK(res < 1e-14);
  CHECK(std::string(m2d_last_error()).empty());
  CHECK(m2d_diagonalization_residual(eps, degenerate, &res) != M2D_OK);
  CHECK(m2d_diagonalization_residual(eps, xi, nullptr) == M2D_INVALID_ARGUMENT);
}

TEST_CASE("C API: configs, overrides and a run") {
  m2d_config* cfg = nullptr;
  CHECK(m2d_config_default("nope", &cfg) == M2D_CONFIG_ERROR);
  CHECK(cfg == nullptr);
  CHECK(m2d_config_from_json("{not json", &cfg) == M2D_CONFIG_ERROR);
  REQUIRE(m2d_config_from_json(R"({"experiment": "diag-check", "params": {"samples": 500}})", &cfg) == M2D_OK);
  CHECK(m2d_config_set(cfg, "pair", "0,2,inf,3") == M2D_OK);
  CHECK(m2d_config_validate(cfg) == M2D_CONFIG_ERROR);
  CHECK(std::string(m2d_last_error()).find("Strichartz") != std::string::npos);
  CHECK(m2d_config_set(cfg, "pair", "0.75,4,inf,2") == M2D_OK);
  CHECK(m2d_config_set(cfg, "seed", "-1") == M2D_CONFIG_ERROR);
  CHECK(m2d_config_set(cfg, "colour", "red") == M2D_CONFIG_ERROR);
  CHECK(m2d_config_set(cfg, "seed", "42") == M2D_OK);
  CHECK(m2d_config_set(cfg, "lambda-list", "16,32") == M2D_OK);
  CHECK(m2d_config_set(cfg, "out", "") == M2D_OK);
  CHECK(m2d_config_validate(cfg) == M2D_OK);
  char* text = nullptr;
  REQUIRE(m2d_config_to_json(cfg, &text) == M2D_OK);
  const std::string js = text;
  m2d_string_free(text);
  CHECK(js.find("\"seed\": 42") != std::string::npos);

  m2d_report* rep = nullptr;
  REQUIRE(m2d_run(cfg, &rep) == M2D_OK);
  m2d_config_free(cfg);
  CHECK(m2d_report_status(rep) == M2D_OK);
  REQUIRE(m2d_report_check_count(rep) == 1);
  const char* id = nullptr;
  int crit = 0, passed = 0, in_budget = 0;
  double secs = -1;
  CHECK(m2d_report_check(rep, 0, &id, &crit, &passed, &secs, &in_budget) == M2D_OK);
  CHECK(std::string(id) == "diag.exact_diagonalization");
  CHECK(passed == 1);
  CHECK(secs >= 0);
  CHECK(m2d_report_check(rep, 1, &id, &crit, &passed, &secs, &in_budget) == M2D_INVALID_ARGUMENT);
  char* summary = nullptr;
  CHECK(m2d_report_check_summary(rep, 0, &summary) == M2D_OK);
  CHECK(std::string(summary).find("max_relative_residual") != std::string::npos);
  m2d_string_free(summary);
  REQUIRE(m2d_report_to_json(rep, 0, &text) == M2D_OK);
  CHECK(std::string(text).find("\"seconds\"") == std::string::npos);
  m2d_string_free(text);
  const std::string dir = "test_capi_report";
  CHECK(m2d_report_write(rep, dir.c_str()) == M2D_OK);
  CHECK(std::filesystem::exists(dir + "/report.json"));
  CHECK(std::filesystem::exists(dir + "/diag.exact_diagonalization.csv"));
  std::filesystem::remove_all(dir);
  m2d_report_free(rep);
  CHECK(m2d_run(nullptr, &rep) == M2D_INVALID_ARGUMENT);
}
