#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "maxwell2d/maxwell2d.h"

namespace {

int report_error(m2d_status st, const char* where) {
  std::fprintf(stderr, "m2d: %s: %s\n", where, m2d_last_error());
  return st == M2D_CONFIG_ERROR || st == M2D_INVALID_ARGUMENT ? M2D_CONFIG_ERROR : M2D_RUNTIME_ERROR;
}

std::string experiment_list() {
  std::string s;
  for (size_t i = 0; i < m2d_experiment_count(); ++i) s += std::string(i ? ", " : "") + m2d_experiment_id(i);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rough-coefficient Maxwell experiments: runs one experiment and writes report.json plus CSVs."};
  std::string experiment, config_path, out, lambda_list, pair;
  std::optional<std::string> seed, kappa;
  bool print_config = false, list_checks = false;
  app.add_option("experiment", experiment, "one of: " + experiment_list());
  app.add_option("--config", config_path, "JSON config; flags below override its fields");
  app.add_option("--seed", seed, "root seed for every random stream");
  app.add_option("--out", out, "output directory");
  app.add_option("--lambda-list", lambda_list, "comma-separated dyadic frequencies, e.g. 16,32,64");
  app.add_option("--pair", pair, "Strichartz pair rho,p,q,n, e.g. 0.75,4,inf,2");
  app.add_option("--kappa", kappa, "coefficient rescaling factor");
  app.add_flag("--print-config", print_config, "print the resolved config and exit");
  app.add_flag("--list-checks", list_checks, "list the acceptance checks and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : M2D_CONFIG_ERROR;
  }

  if (list_checks) {
    for (size_t i = 0; i < m2d_check_count(); ++i) {
      const char *id = nullptr, *exp = nullptr;
      int crit = 0;
      double budget = 0;
      m2d_check_info(i, &id, &crit, &exp, &budget);
      std::printf("%2d  %-28s %-11s budget %gs\n", crit, id, exp, budget);
    }
    return 0;
  }
  if (experiment.empty()) {
    std::fprintf(stderr, "m2d: missing experiment (one of: %s)\n", experiment_list().c_str());
    return M2D_CONFIG_ERROR;
  }

  m2d_config* cfg = nullptr;
  m2d_status st = m2d_config_load(experiment.c_str(), config_path.empty() ? nullptr : config_path.c_str(), &cfg);
  if (st != M2D_OK) return report_error(st, "config");
  auto set = [&](const char* key, const std::string& value) {
    const m2d_status s = m2d_config_set(cfg, key, value.c_str());
    if (s != M2D_OK) throw s;
  };
  try {
    if (seed) set("seed", *seed);
    if (!out.empty()) set("out", out);
    if (!lambda_list.empty()) set("lambda-list", lambda_list);
    if (!pair.empty()) set("pair", pair);
    if (kappa) set("kappa", *kappa);
  } catch (m2d_status s) {
    const int rc = report_error(s, "config");
    m2d_config_free(cfg);
    return rc;
  }
  st = m2d_config_validate(cfg);
  if (st != M2D_OK) {
    const int rc = report_error(st, "config");
    m2d_config_free(cfg);
    return rc;
  }

  if (print_config) {
    char* text = nullptr;
    m2d_config_to_json(cfg, &text);
    std::printf("%s\n", text);
    m2d_string_free(text);
    m2d_config_free(cfg);
    return 0;
  }

  m2d_report* rep = nullptr;
  st = m2d_run(cfg, &rep);
  m2d_config_free(cfg);
  if (st != M2D_OK) return report_error(st, "run");
  for (size_t i = 0; i < m2d_report_check_count(rep); ++i) {
    const char* id = nullptr;
    int crit = 0, passed = 0, in_budget = 0;
    double secs = 0;
    m2d_report_check(rep, i, &id, &crit, &passed, &secs, &in_budget);
    char* summary = nullptr;
    m2d_report_check_summary(rep, i, &summary);
    std::printf("%s  [%d] %s  %.1fs%s  %s\n", passed ? "PASS" : "FAIL", crit, id, secs,
                in_budget ? "" : " (over budget)", summary);
    m2d_string_free(summary);
  }
  const m2d_status result = m2d_report_status(rep);
  m2d_report_free(rep);
  return result;
}
