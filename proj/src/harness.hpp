#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sharpness.hpp"
#include "spectral.hpp"

namespace m2d {

const std::vector<std::string>& experiment_ids();

struct ExperimentConfig {
  std::string experiment;
  nlohmann::json model;  // permittivity spec; null when the experiment fixes its own models
  std::vector<int> grid_points{32, 32};
  std::vector<double> grid_extent{2 * kPi, 2 * kPi};
  RVec lambda_list;
  std::vector<StrichartzPair> pairs;
  uint64_t seed = 1;
  std::string out_dir;
  double kappa = 1;
  nlohmann::json params;  // experiment-specific settings, fully populated with defaults

  nlohmann::json to_json() const;
  GridSpec grid() const;
};

// Defaults for an experiment; throws a config error for an unknown id.
ExperimentConfig default_config(const std::string& experiment);
// Defaults of doc["experiment"] overlaid with the document. Unknown keys are config errors.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
// The file may omit "experiment"; when present it must equal the given id.
ExperimentConfig load_config(const std::string& path, const std::string& experiment);
// Throws ErrorKind::Config on the first violated invariant.
void validate(const ExperimentConfig& cfg);

StrichartzPair parse_pair(const std::string& text);  // "0.75,4,inf,2"
RVec parse_lambda_list(const std::string& text);     // "16,32,64"
nlohmann::json pair_to_json(const StrichartzPair& p);
StrichartzPair pair_from_json(const nlohmann::json& j);

// Synthetic models with period L are rescaled to L / kappa^2, so second derivatives scale by kappa^4.
nlohmann::json apply_kappa(const nlohmann::json& model, double kappa);

struct CheckInfo {
  std::string id;
  int criterion = 0;
  std::string experiment;
  std::string title;
  double budget_seconds = 0;
};
const std::vector<CheckInfo>& check_registry();
std::vector<CheckInfo> checks_for(const std::string& experiment);

struct CheckResult {
  CheckInfo info;
  bool pass = false;
  bool errored = false;
  std::string error;
  nlohmann::json measured, tolerance;
  double seconds = 0;
  std::map<std::string, std::string> csv;  // file name -> contents

  bool within_budget() const { return seconds <= info.budget_seconds; }
};

struct Report {
  nlohmann::json config;
  std::vector<CheckResult> checks;
  nlohmann::json environment;

  bool passed() const;
  bool errored() const;
  // Without timing the JSON depends only on the config and seed.
  nlohmann::json to_json(bool with_timing = true) const;
};

nlohmann::json environment_fingerprint();

// Runs the checks of cfg.experiment. Writes report.json and the per-check CSVs when cfg.out_dir is set.
Report run_experiment(const ExperimentConfig& cfg);
void write_report(const Report& r, const std::string& dir);

// Check bodies, keyed by check id.
CheckResult run_check(const CheckInfo& info, const ExperimentConfig& cfg);
bool check_implemented(const std::string& id);

}  // namespace m2d
