#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "harness.hpp"

using namespace m2d;
namespace fs = std::filesystem;

namespace {

void expect_config_error(const std::function<void()>& f, const std::string& fragment) {
  try {
    f();
    FAIL("expected a config error containing '" << fragment << "'");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    CHECK_MESSAGE(std::string(e.what()).find(fragment) != std::string::npos, e.what());
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig quick(const std::string& experiment, const std::string& out) {
  ExperimentConfig c = default_config(experiment);
  c.out_dir = out;
  if (experiment == "diag-check") c.params["samples"] = 2000;
  if (experiment == "envelope") {
    c.params["fields"] = 4;
    c.grid_points = {32, 32};
    c.params["kmax"] = 10;
  }
  return c;
}

}  // namespace

TEST_CASE("every default config validates and survives a JSON round trip") {
  for (const auto& id : experiment_ids()) {
    CAPTURE(id);
    const ExperimentConfig c = default_config(id);
    CHECK_NOTHROW(validate(c));
    const ExperimentConfig back = config_from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
  }
  expect_config_error([] { default_config("nope"); }, "unknown experiment");
}

TEST_CASE("pair and lambda list parsing") {
  const StrichartzPair p = parse_pair("0.75,4,inf,2");
  CHECK(p.rho == 0.75);
  CHECK(p.p == 4);
  CHECK(std::isinf(p.q));
  CHECK(p.n == 2);
  CHECK(pair_from_json(pair_to_json(p)).q == kInf);
  expect_config_error([] { parse_pair("0.75,4,inf"); }, "four");
  expect_config_error([] { parse_pair("0.75,4,x,2"); }, "not a number");
  expect_config_error([] { parse_pair("0.75,4,inf,2.5"); }, "integer");
  CHECK(parse_lambda_list("16,32,64") == RVec{16, 32, 64});
  expect_config_error([] { parse_lambda_list("16,3x"); }, "not a number");
}

TEST_CASE("validation rejects bad configs before any compute") {
  const std::string out = "test_harness_never_written";
  fs::remove_all(out);
  ExperimentConfig c = default_config("sharpness");
  c.out_dir = out;
  c.pairs = {parse_pair("0,2,inf,3")};
  expect_config_error([&] { run_experiment(c); }, "invalid Strichartz pair");
  CHECK_FALSE(fs::exists(out));

  c = default_config("sharpness");
  c.lambda_list = {16, 48};
  expect_config_error([&] { validate(c); }, "powers of two");
  c.lambda_list = {32, 16};
  expect_config_error([&] { validate(c); }, "ascending");
  c.lambda_list = {1};
  expect_config_error([&] { validate(c); }, "powers of two");
  c = default_config("sharpness");
  c.kappa = 2;
  expect_config_error([&] { validate(c); }, "kappa");
  c = default_config("pdo-scan");
  c.kappa = 0;
  expect_config_error([&] { validate(c); }, "kappa");
  c = default_config("pdo-scan");
  c.model = Permittivity::kerr({}).to_json();
  expect_config_error([&] { validate(c); }, "state-independent");
  c = default_config("simulate");
  c.grid_points = {31, 32};
  expect_config_error([&] { validate(c); }, "even");

  using nlohmann::json;
  expect_config_error([] { config_from_json(json{{"experiment", "kerr"}, {"sed", 3}}); }, "unknown config key");
  expect_config_error([] { config_from_json(json{{"experiment", "kerr"}, {"params", {{"stats", 3}}}}); },
                      "unknown parameter");
  expect_config_error([] { config_from_json(json{{"experiment", "kerr"}, {"params", {{"states", "many"}}}}); },
                      "wrong type");
  expect_config_error([] { config_from_json(json{{"experiment", "kerr"}, {"seed", "x"}}); }, "config");
  expect_config_error([] { config_from_json(json::array()); }, "object");
}

TEST_CASE("config files, overrides and kappa") {
  const std::string path = "test_harness_config.json";
  {
    std::ofstream os(path);
    os << R"({"lambda_list": [16, 32], "seed": 9, "pairs": [[0.75, 4, "inf", 2]], "params": {"gammas": [1.0]}})";
  }
  const ExperimentConfig c = load_config(path, "sharpness");
  CHECK(c.experiment == "sharpness");
  CHECK(c.lambda_list == RVec{16, 32});
  CHECK(c.seed == 9);
  CHECK(c.params["gammas"].size() == 1);
  CHECK(c.params["s_values"].size() == 3);
  expect_config_error([&] { load_config(path, "kerr"); }, "unknown parameter");
  expect_config_error([&] { load_config(path); }, "experiment");
  {
    std::ofstream os(path);
    os << R"({"experiment": "kerr"})";
  }
  expect_config_error([&] { load_config(path, "envelope"); }, "not 'envelope'");
  expect_config_error([&] { load_config("does_not_exist.json", "kerr"); }, "cannot read");
  fs::remove(path);

  const auto model = Permittivity::synthetic(2.0, 3, 0.1, 2.0).to_json();
  CHECK(apply_kappa(model, 2.0)["params"]["period"].get<double>() == 0.5);
  CHECK(apply_kappa(model, 1.0) == model);
  const auto k = Permittivity::kerr({}).to_json();
  CHECK(apply_kappa(k, 3.0) == k);
}

TEST_CASE("check coverage: every criterion is reachable exactly once") {
  const auto& reg = check_registry();
  std::set<std::string> ids;
  std::set<int> criteria;
  for (const auto& c : reg) {
    CAPTURE(c.id);
    CHECK(ids.insert(c.id).second);
    CHECK(criteria.insert(c.criterion).second);
    CHECK(check_implemented(c.id));
    CHECK(c.budget_seconds > 0);
    const auto& exps = experiment_ids();
    CHECK(std::find(exps.begin(), exps.end(), c.experiment) != exps.end());
  }
  CHECK(criteria == std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  std::multiset<std::string> reached;
  for (const auto& e : experiment_ids()) {
    CHECK_FALSE(checks_for(e).empty());
    for (const auto& c : checks_for(e)) reached.insert(c.id);
  }
  CHECK(reached.size() == reg.size());
  for (const auto& id : ids) CHECK(reached.count(id) == 1);
}

TEST_CASE("reports are deterministic given the config and seed") {
  for (const std::string exp : {"diag-check", "envelope"}) {
    CAPTURE(exp);
    const std::string a = "test_harness_run_a", b = "test_harness_run_b", c = "test_harness_run_c";
    for (const auto& d : {a, b, c}) fs::remove_all(d);
    const Report ra = run_experiment(quick(exp, a));
    const Report rb = run_experiment(quick(exp, b));
    ExperimentConfig other = quick(exp, c);
    other.seed = 2;
    const Report rc = run_experiment(other);
    CHECK(ra.passed());
    REQUIRE(ra.checks.size() == checks_for(exp).size());
    for (size_t i = 0; i < ra.checks.size(); ++i) CHECK(ra.checks[i].info.id == checks_for(exp)[i].id);
    // Report JSON modulo timing and the output directory.
    auto strip = [](const Report& r) {
      auto j = r.to_json(false);
      j["config"].erase("out");
      return j;
    };
    CHECK(strip(ra) == strip(rb));
    CHECK(strip(ra) != strip(rc));
    CHECK(fs::exists(fs::path(a) / "report.json"));
    for (const auto& chk : ra.checks)
      for (const auto& [name, text] : chk.csv) {
        CAPTURE(name);
        CHECK(slurp(fs::path(a) / name) == text);
        CHECK(slurp(fs::path(a) / name) == slurp(fs::path(b) / name));
        CHECK(slurp(fs::path(a) / name) != slurp(fs::path(c) / name));
      }
    const auto j = nlohmann::json::parse(slurp(fs::path(a) / "report.json"));
    CHECK(j["checks"].size() == ra.checks.size());
    CHECK(j["status"] == "pass");
    CHECK(j["checks"][0].contains("seconds"));
    CHECK(j["environment"].contains("fftw"));
    for (const auto& d : {a, b, c}) fs::remove_all(d);
  }
}

TEST_CASE("module errors are captured into the report") {
  ExperimentConfig c = default_config("fbi-check");
  c.out_dir = "";
  c.lambda_list = {16};
  c.params["inputs"] = 1;
  c.params["isometry_lambdas"] = {16};
  const Report r = run_experiment(c);
  REQUIRE(r.checks.size() == 2);
  CHECK(r.checks[0].pass);
  CHECK(r.checks[1].errored);
  CHECK(r.checks[1].error.find("fbi.remainder_slopes") != std::string::npos);
  CHECK(r.errored());
  CHECK_FALSE(r.passed());
  CHECK(r.to_json()["status"] == "error");
  CHECK(r.to_json()["checks"][1].contains("error"));
}

TEST_CASE("an unwritable output directory is an I/O error") {
  std::ofstream("test_harness_blocker") << "x";
  ExperimentConfig c = quick("diag-check", "test_harness_blocker/sub");
  try {
    run_experiment(c);
    FAIL("expected an I/O error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
  fs::remove("test_harness_blocker");
}
