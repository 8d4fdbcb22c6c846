#include "harness.hpp"

#include <fftw3.h>
#include <sys/utsname.h>

#include <Eigen/Core>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace m2d {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::Config, msg); }

RVec dyadic(int lo, int hi) {
  RVec v;
  for (int e = lo; e <= hi; ++e) v.push_back(std::ldexp(1.0, e));
  return v;
}

json synthetic_model(double s, uint64_t seed, double amplitude, double period) {
  return Permittivity::synthetic(s, seed, amplitude, period).to_json();
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

}  // namespace

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"diag-check", "pdo-scan", "fbi-check", "simulate",
                                            "kerr",       "envelope", "sharpness"};
  return ids;
}

GridSpec ExperimentConfig::grid() const { return make_grid(grid_extent, grid_points, false); }

json pair_to_json(const StrichartzPair& p) {
  return {p.rho, p.p, std::isinf(p.q) ? json("inf") : json(p.q), p.n};
}

StrichartzPair pair_from_json(const json& j) {
  if (j.is_string()) return parse_pair(j.get<std::string>());
  if (!j.is_array() || j.size() != 4) config_error("pair must be [rho, p, q, n]");
  auto num = [](const json& v) {
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf" || s == "infinity") return kInf;
      config_error("pair entry '" + s + "' is not a number");
    }
    if (!v.is_number()) config_error("pair entries must be numbers or \"inf\"");
    return v.get<double>();
  };
  StrichartzPair p;
  p.rho = num(j[0]);
  p.p = num(j[1]);
  p.q = num(j[2]);
  const double n = num(j[3]);
  if (n != std::floor(n) || !std::isfinite(n)) config_error("pair dimension n must be an integer");
  p.n = static_cast<int>(n);
  return p;
}

StrichartzPair parse_pair(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
  if (parts.size() != 4) config_error("pair '" + text + "' must have four comma-separated entries");
  json arr = json::array();
  for (const auto& s : parts) {
    if (s == "inf" || s == "infinity") {
      arr.push_back("inf");
      continue;
    }
    try {
      size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      arr.push_back(v);
    } catch (const std::logic_error&) {
      config_error("pair entry '" + s + "' is not a number");
    }
  }
  return pair_from_json(arr);
}

RVec parse_lambda_list(const std::string& text) {
  RVec out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      config_error("lambda list entry '" + item + "' is not a number");
    }
  }
  if (out.empty()) config_error("lambda list is empty");
  return out;
}

json apply_kappa(const json& model, double kappa) {
  if (model.is_null() || kappa == 1) return model;
  json m = model;
  if (m.value("model", std::string()) == "synthetic_cs") {
    json& p = m["params"];
    p["period"] = p.value("period", 2 * kPi) / (kappa * kappa);
  }
  return m;
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.pairs = {StrichartzPair{}};
  c.lambda_list = dyadic(4, 8);
  c.model = nullptr;
  c.out_dir = "m2d_out/" + experiment;
  if (experiment == "diag-check") {
    c.lambda_list = {16, 64, 256};
    c.params = {{"samples", 10000}};
  } else if (experiment == "fbi-check") {
    c.lambda_list = dyadic(4, 9);
    c.params = {{"inputs", 10}, {"isometry_lambdas", {16, 64, 256}}};
  } else if (experiment == "pdo-scan") {
    c.model = synthetic_model(2.0, 7, 0.25, 2.0);
    c.params = {{"trials", 2}, {"leakage_lambdas", {16, 32, 64, 128}}};
  } else if (experiment == "simulate") {
    c.model = synthetic_model(2.0, 9, 0.1, 2 * kPi);
    c.params = {{"T", 1.0},           {"dt", 5e-3},        {"source_dt", 1e-2},
                {"kerr_amplitude", 0.1}, {"gauge_sizes", {16, 32, 64, 128}}, {"snapshots", false}};
  } else if (experiment == "kerr") {
    c.model = Permittivity::kerr({1.0}).to_json();
    c.params = {{"states", 1000}, {"amplitude", 0.1}, {"T", 1.0}, {"dt", 2e-3}, {"energy_s", 1.0}};
  } else if (experiment == "envelope") {
    c.grid_points = {64, 64};
    c.params = {{"fields", 50}, {"delta", 0.5}, {"kmax", 20}};
  } else if (experiment == "sharpness") {
    c.params = {{"s_values", {1.0, 1.5, 2.0}}, {"gammas", {0.75, 1.0}}, {"workers", 0}};
  } else {
    config_error("unknown experiment '" + experiment + "'");
  }
  return c;
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) config_error("config must be a JSON object");
  if (!doc.contains("experiment") || !doc["experiment"].is_string()) config_error("config needs a string 'experiment'");
  ExperimentConfig c = default_config(doc["experiment"].get<std::string>());
  static const std::set<std::string> known{"experiment", "model", "grid", "lambda_list", "pairs",
                                           "seed",       "out",   "kappa", "params"};
  try {
    for (const auto& [key, value] : doc.items()) {
      if (!known.count(key)) config_error("unknown config key '" + key + "'");
      if (key == "model") {
        c.model = value;
      } else if (key == "grid") {
        if (value.contains("points")) c.grid_points = value["points"].get<std::vector<int>>();
        if (value.contains("extent")) c.grid_extent = value["extent"].get<std::vector<double>>();
        for (const auto& [gk, gv] : value.items())
          if (gk != "points" && gk != "extent") config_error("unknown grid key '" + gk + "'");
      } else if (key == "lambda_list") {
        c.lambda_list = value.get<RVec>();
      } else if (key == "pairs") {
        if (!value.is_array()) config_error("pairs must be a list");
        c.pairs.clear();
        for (const auto& p : value) c.pairs.push_back(pair_from_json(p));
      } else if (key == "seed") {
        c.seed = value.get<uint64_t>();
      } else if (key == "out") {
        c.out_dir = value.get<std::string>();
      } else if (key == "kappa") {
        c.kappa = value.get<double>();
      } else if (key == "params") {
        if (!value.is_object()) config_error("params must be an object");
        for (const auto& [pk, pv] : value.items()) {
          if (!c.params.contains(pk)) config_error("unknown parameter '" + pk + "' for " + c.experiment);
          if (!same_kind(c.params[pk], pv)) config_error("parameter '" + pk + "' has the wrong type");
          c.params[pk] = pv;
        }
      }
    }
  } catch (const json::exception& e) {
    config_error(std::string("config: ") + e.what());
  }
  return c;
}

namespace {

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) config_error("cannot read config file '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    config_error("config file '" + path + "': " + e.what());
  }
}

}  // namespace

ExperimentConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

ExperimentConfig load_config(const std::string& path, const std::string& experiment) {
  json doc = read_json_file(path);
  if (!doc.is_object()) config_error("config must be a JSON object");
  if (!doc.contains("experiment")) doc["experiment"] = experiment;
  if (doc["experiment"] != experiment)
    config_error("config file is for experiment " + doc["experiment"].dump() + ", not '" + experiment + "'");
  return config_from_json(doc);
}

void validate(const ExperimentConfig& c) {
  const auto& ids = experiment_ids();
  if (std::find(ids.begin(), ids.end(), c.experiment) == ids.end())
    config_error("unknown experiment '" + c.experiment + "'");
  if (c.pairs.empty()) config_error("at least one Strichartz pair is required");
  for (const auto& p : c.pairs)
    if (spectral::strichartz_classify(p.rho, p.p, p.q, p.n) == spectral::PairClass::invalid)
      config_error("invalid Strichartz pair " + pair_to_json(p).dump());
  if (c.lambda_list.empty()) config_error("lambda_list is empty");
  for (size_t i = 0; i < c.lambda_list.size(); ++i) {
    const double l = c.lambda_list[i];
    int e = 0;
    if (!(l >= 2) || std::frexp(l, &e) != 0.5) config_error("lambda_list entries must be powers of two >= 2");
    if (i > 0 && !(l > c.lambda_list[i - 1])) config_error("lambda_list must be strictly ascending");
  }
  if (!(c.kappa > 0) || !std::isfinite(c.kappa)) config_error("kappa must be positive and finite");
  if (c.grid_points.size() != 2 || c.grid_extent.size() != 2) config_error("grid must be two-dimensional");
  for (int n : c.grid_points)
    if (n < 8 || n % 2) config_error("grid points must be even and >= 8");
  for (double L : c.grid_extent)
    if (!(L > 0) || !std::isfinite(L)) config_error("grid extents must be positive");
  if (!c.model.is_null()) {
    const Permittivity m = Permittivity::from_json(c.model);
    if (m.kind() == ModelKind::counterexample && c.kappa != 1)
      config_error("the counterexample family is fixed; kappa must be 1");
    if (c.experiment == "pdo-scan" && m.needs_state()) config_error("pdo-scan needs a state-independent model");
    if (c.experiment == "kerr" && m.kind() != ModelKind::kerr) config_error("the kerr experiment needs a kerr model");
  }
  if (c.experiment == "sharpness" && c.kappa != 1) config_error("the counterexample family is fixed; kappa must be 1");
  for (const auto& [k, v] : c.params.items()) {
    if (v.is_number() && !(v.get<double>() >= 0)) config_error("parameter '" + k + "' must be non-negative");
    if (v.is_array() && v.empty()) config_error("parameter '" + k + "' must not be empty");
  }
}

json ExperimentConfig::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["model"] = model;
  j["grid"] = {{"points", grid_points}, {"extent", grid_extent}};
  j["lambda_list"] = lambda_list;
  j["pairs"] = json::array();
  for (const auto& p : pairs) j["pairs"].push_back(pair_to_json(p));
  j["seed"] = seed;
  j["out"] = out_dir;
  j["kappa"] = kappa;
  j["params"] = params;
  return j;
}

const std::vector<CheckInfo>& check_registry() {
  static const std::vector<CheckInfo> reg{
      {"diag.exact_diagonalization", 1, "diag-check", "m d m^-1 = p at random (x, xi) over all models", 10},
      {"fbi.isometry", 2, "fbi-check", "||T f||_{L2_Phi} = ||f||_2 on band-limited packets", 60},
      {"fbi.remainder_slopes", 3, "fbi-check", "conjugation remainder decays like lambda^(-order/2)", 300},
      {"pdo.mdn_bounded", 4, "pdo-scan", "MDN - P stays O(1) in lambda", 600},
      {"pdo.frequency_leakage", 5, "pdo-scan", "S'_mu D S'_lambda decays at mu = 4 lambda", 300},
      {"evolve.charge_law", 6, "simulate", "charge density follows the source time integral", 120},
      {"evolve.energy", 7, "kerr", "symmetrizer, linear energy conservation, Gronwall constant", 600},
      {"evolve.envelopes", 8, "envelope", "frequency envelope majorizes and varies slowly", 60},
      {"sharpness.exponents", 9, "sharpness", "counterexample exponents and wave identity", 1800},
      {"solver.convergence", 10, "simulate", "RK4 order in dt and gauge solve order in h", 300},
  };
  return reg;
}

std::vector<CheckInfo> checks_for(const std::string& experiment) {
  std::vector<CheckInfo> out;
  for (const auto& c : check_registry())
    if (c.experiment == experiment) out.push_back(c);
  return out;
}

bool Report::passed() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

bool Report::errored() const {
  for (const auto& c : checks)
    if (c.errored) return true;
  return false;
}

json Report::to_json(bool with_timing) const {
  json j;
  j["config"] = config;
  j["status"] = errored() ? "error" : passed() ? "pass" : "fail";
  j["checks"] = json::array();
  for (const auto& c : checks) {
    json e{{"id", c.info.id},
           {"criterion", c.info.criterion},
           {"experiment", c.info.experiment},
           {"title", c.info.title},
           {"pass", c.pass},
           {"measured", c.measured},
           {"tolerance", c.tolerance},
           {"budget_seconds", c.info.budget_seconds}};
    if (c.errored) e["error"] = c.error;
    if (with_timing) {
      e["seconds"] = c.seconds;
      e["within_budget"] = c.within_budget();
    }
    j["checks"].push_back(e);
  }
  j["environment"] = environment;
  return j;
}

json environment_fingerprint() {
  json j;
  j["compiler"] = __VERSION__;
  j["cxx_standard"] = static_cast<long>(__cplusplus);
  j["fftw"] = std::string(fftw_version);
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["fft_deterministic"] = fft_deterministic();
#ifdef NDEBUG
  j["assertions"] = false;
#else
  j["assertions"] = true;
#endif
  utsname u{};
  if (uname(&u) == 0) {
    j["os"] = std::string(u.sysname) + " " + u.release;
    j["machine"] = u.machine;
  }
  j["hardware_threads"] = std::thread::hardware_concurrency();
  return j;
}

void write_report(const Report& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory '" + dir + "': " + ec.message());
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream os(fs::path(dir) / name, std::ios::binary);
    os << text;
    if (!os) throw Error(ErrorKind::Io, "cannot write '" + (fs::path(dir) / name).string() + "'");
  };
  for (const auto& c : r.checks)
    for (const auto& [name, text] : c.csv) put(name, text);
  put("report.json", r.to_json().dump(2) + "\n");
}

Report run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  Report r;
  r.config = cfg.to_json();
  r.environment = environment_fingerprint();
  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create output directory '" + cfg.out_dir + "': " + ec.message());
  }
  for (const auto& info : checks_for(cfg.experiment)) r.checks.push_back(run_check(info, cfg));
  if (!cfg.out_dir.empty()) write_report(r, cfg.out_dir);
  return r;
}

}  // namespace m2d
