#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "maxwell2d/maxwell2d.h"

namespace {

struct Line {
  bool pass = false, in_budget = false;
  std::string id, summary;
  double seconds = 0, budget = 0;
};

}  // namespace

// Runs every experiment at its default configuration and prints one line per acceptance criterion.
// A criterion passes when its check passes within its runtime budget.
int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite: one PASS/FAIL line per criterion."};
  std::string out = "acceptance_out";
  std::string seed = "1";
  std::vector<int> only;
  app.add_option("--out", out, "directory for the per-experiment reports");
  app.add_option("--seed", seed, "root seed");
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  std::map<int, std::string> experiment_of;
  std::map<int, double> budget_of;
  for (size_t i = 0; i < m2d_check_count(); ++i) {
    const char *id = nullptr, *exp = nullptr;
    int crit = 0;
    double budget = 0;
    m2d_check_info(i, &id, &crit, &exp, &budget);
    experiment_of[crit] = exp;
    budget_of[crit] = budget;
  }
  std::set<std::string> experiments;
  for (const auto& [crit, exp] : experiment_of)
    if (only.empty() || std::find(only.begin(), only.end(), crit) != only.end()) experiments.insert(exp);

  std::map<int, Line> lines;
  std::map<std::string, std::string> run_errors;
  for (size_t e = 0; e < m2d_experiment_count(); ++e) {
    const std::string exp = m2d_experiment_id(e);
    if (!experiments.count(exp)) continue;
    std::fprintf(stderr, "running %s\n", exp.c_str());
    m2d_config* cfg = nullptr;
    m2d_report* rep = nullptr;
    m2d_status st = m2d_config_default(exp.c_str(), &cfg);
    if (st == M2D_OK) st = m2d_config_set(cfg, "seed", seed.c_str());
    if (st == M2D_OK) st = m2d_config_set(cfg, "out", (out + "/" + exp).c_str());
    if (st == M2D_OK) st = m2d_run(cfg, &rep);
    m2d_config_free(cfg);
    if (st != M2D_OK) {
      run_errors[exp] = m2d_last_error();
      continue;
    }
    for (size_t i = 0; i < m2d_report_check_count(rep); ++i) {
      Line l;
      const char* id = nullptr;
      int crit = 0, passed = 0, in_budget = 0;
      m2d_report_check(rep, i, &id, &crit, &passed, &l.seconds, &in_budget);
      char* summary = nullptr;
      m2d_report_check_summary(rep, i, &summary);
      l.pass = passed;
      l.in_budget = in_budget;
      l.id = id;
      l.summary = summary;
      l.budget = budget_of[crit];
      m2d_string_free(summary);
      lines[crit] = l;
    }
    m2d_report_free(rep);
  }

  bool all = true;
  for (const auto& [crit, exp] : experiment_of) {
    if (!only.empty() && std::find(only.begin(), only.end(), crit) == only.end()) continue;
    auto it = lines.find(crit);
    if (it == lines.end()) {
      all = false;
      std::printf("criterion %2d: FAIL  %s did not run: %s\n", crit, exp.c_str(), run_errors[exp].c_str());
      continue;
    }
    const Line& l = it->second;
    const bool ok = l.pass && l.in_budget;
    all = all && ok;
    std::printf("criterion %2d: %s  %s  runtime %.1fs (limit %gs%s)  %s\n", crit, ok ? "PASS" : "FAIL", l.id.c_str(),
                l.seconds, l.budget, l.in_budget ? "" : ", exceeded", l.summary.c_str());
  }
  std::fflush(stdout);
  return all ? 0 : 1;
}
