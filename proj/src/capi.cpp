#include <cstdlib>
#include <cstring>
#include <sstream>

#include "harness.hpp"
#include "maxwell2d/maxwell2d.h"

struct m2d_config {
  m2d::ExperimentConfig cfg;
};

struct m2d_report {
  m2d::Report report;
};

namespace {

thread_local std::string g_last_error;

m2d_status status_of(const m2d::Error& e) {
  switch (e.kind()) {
    case m2d::ErrorKind::Config:
      return M2D_CONFIG_ERROR;
    case m2d::ErrorKind::InvalidArgument:
      return M2D_INVALID_ARGUMENT;
    default:
      return M2D_RUNTIME_ERROR;
  }
}

template <class F>
m2d_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return M2D_OK;
  } catch (const m2d::Error& e) {
    g_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return M2D_RUNTIME_ERROR;
  } catch (...) {
    g_last_error = "unknown error";
    return M2D_RUNTIME_ERROR;
  }
}

m2d_status null_argument(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return M2D_INVALID_ARGUMENT;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string summary(const m2d::CheckResult& c) {
  std::ostringstream os;
  if (c.errored) {
    os << "error: " << c.error;
    return os.str();
  }
  os << "measured ";
  bool first = true;
  for (const auto& [k, v] : c.measured.items()) {
    if (v.is_object() || (v.is_array() && v.size() > 4)) continue;
    os << (first ? "" : ", ") << k << "=" << v.dump();
    first = false;
  }
  os << "; tolerance " << c.tolerance.dump();
  return os.str();
}

}  // namespace

extern "C" {

const char* m2d_version(void) { return "0.1.0"; }

const char* m2d_last_error(void) { return g_last_error.c_str(); }

void m2d_string_free(char* s) { std::free(s); }

size_t m2d_experiment_count(void) { return m2d::experiment_ids().size(); }

const char* m2d_experiment_id(size_t i) {
  const auto& ids = m2d::experiment_ids();
  return i < ids.size() ? ids[i].c_str() : nullptr;
}

size_t m2d_check_count(void) { return m2d::check_registry().size(); }

m2d_status m2d_check_info(size_t i, const char** id, int* criterion, const char** experiment, double* budget_seconds) {
  const auto& reg = m2d::check_registry();
  if (i >= reg.size()) {
    g_last_error = "check index out of range";
    return M2D_INVALID_ARGUMENT;
  }
  if (id) *id = reg[i].id.c_str();
  if (criterion) *criterion = reg[i].criterion;
  if (experiment) *experiment = reg[i].experiment.c_str();
  if (budget_seconds) *budget_seconds = reg[i].budget_seconds;
  return M2D_OK;
}

m2d_status m2d_config_default(const char* experiment, m2d_config** out) {
  if (!experiment || !out) return null_argument("experiment/out");
  return guarded([&] { *out = new m2d_config{m2d::default_config(experiment)}; });
}

m2d_status m2d_config_from_json(const char* json, m2d_config** out) {
  if (!json || !out) return null_argument("json/out");
  return guarded([&] {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      throw m2d::Error(m2d::ErrorKind::Config, std::string("config: ") + e.what());
    }
    *out = new m2d_config{m2d::config_from_json(doc)};
  });
}

m2d_status m2d_config_from_file(const char* path, m2d_config** out) {
  if (!path || !out) return null_argument("path/out");
  return guarded([&] { *out = new m2d_config{m2d::load_config(path)}; });
}

m2d_status m2d_config_load(const char* experiment, const char* path, m2d_config** out) {
  if (!experiment || !out) return null_argument("experiment/out");
  return guarded([&] {
    *out = new m2d_config{path ? m2d::load_config(path, experiment) : m2d::default_config(experiment)};
  });
}

m2d_status m2d_config_set(m2d_config* c, const char* key, const char* value) {
  if (!c || !key || !value) return null_argument("config/key/value");
  return guarded([&] {
    const std::string k = key, v = value;
    auto number = [&](const std::string& what) {
      try {
        size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
      } catch (const std::logic_error&) {
        throw m2d::Error(m2d::ErrorKind::Config, what + " '" + v + "' is not a number");
      }
    };
    if (k == "seed") {
      try {
        size_t used = 0;
        const unsigned long long s = std::stoull(v, &used);
        if (used != v.size() || v.find('-') != std::string::npos) throw std::invalid_argument(v);
        c->cfg.seed = s;
      } catch (const std::logic_error&) {
        throw m2d::Error(m2d::ErrorKind::Config, "seed '" + v + "' is not an unsigned integer");
      }
    } else if (k == "out") {
      c->cfg.out_dir = v;
    } else if (k == "lambda-list") {
      c->cfg.lambda_list = m2d::parse_lambda_list(v);
    } else if (k == "pair") {
      c->cfg.pairs = {m2d::parse_pair(v)};
    } else if (k == "kappa") {
      c->cfg.kappa = number("kappa");
    } else {
      throw m2d::Error(m2d::ErrorKind::Config, "unknown config override '" + k + "'");
    }
  });
}

m2d_status m2d_config_validate(const m2d_config* c) {
  if (!c) return null_argument("config");
  return guarded([&] { m2d::validate(c->cfg); });
}

m2d_status m2d_config_to_json(const m2d_config* c, char** out) {
  if (!c || !out) return null_argument("config/out");
  return guarded([&] { *out = copy_string(c->cfg.to_json().dump(2)); });
}

void m2d_config_free(m2d_config* c) { delete c; }

m2d_status m2d_run(const m2d_config* c, m2d_report** out) {
  if (!c || !out) return null_argument("config/out");
  return guarded([&] { *out = new m2d_report{m2d::run_experiment(c->cfg)}; });
}

m2d_status m2d_report_status(const m2d_report* r) {
  if (!r) return null_argument("report");
  if (r->report.errored()) return M2D_RUNTIME_ERROR;
  return r->report.passed() ? M2D_OK : M2D_CHECK_FAILED;
}

size_t m2d_report_check_count(const m2d_report* r) { return r ? r->report.checks.size() : 0; }

m2d_status m2d_report_check(const m2d_report* r, size_t i, const char** id, int* criterion, int* passed,
                            double* seconds, int* within_budget) {
  if (!r) return null_argument("report");
  if (i >= r->report.checks.size()) {
    g_last_error = "check index out of range";
    return M2D_INVALID_ARGUMENT;
  }
  const auto& c = r->report.checks[i];
  if (id) *id = c.info.id.c_str();
  if (criterion) *criterion = c.info.criterion;
  if (passed) *passed = c.pass ? 1 : 0;
  if (seconds) *seconds = c.seconds;
  if (within_budget) *within_budget = c.within_budget() ? 1 : 0;
  return M2D_OK;
}

m2d_status m2d_report_check_summary(const m2d_report* r, size_t i, char** out) {
  if (!r || !out) return null_argument("report/out");
  if (i >= r->report.checks.size()) {
    g_last_error = "check index out of range";
    return M2D_INVALID_ARGUMENT;
  }
  return guarded([&] { *out = copy_string(summary(r->report.checks[i])); });
}

m2d_status m2d_report_to_json(const m2d_report* r, int with_timing, char** out) {
  if (!r || !out) return null_argument("report/out");
  return guarded([&] { *out = copy_string(r->report.to_json(with_timing != 0).dump(2)); });
}

m2d_status m2d_report_write(const m2d_report* r, const char* dir) {
  if (!r || !dir) return null_argument("report/dir");
  return guarded([&] { m2d::write_report(r->report, dir); });
}

void m2d_report_free(m2d_report* r) { delete r; }

m2d_status m2d_strichartz_classify(double rho, double p, double q, int n, int* out) {
  if (!out) return null_argument("out");
  return guarded([&] {
    switch (m2d::spectral::strichartz_classify(rho, p, q, n)) {
      case m2d::spectral::PairClass::sharp:
        *out = 0;
        break;
      case m2d::spectral::PairClass::nonsharp:
        *out = 1;
        break;
      default:
        *out = 2;
    }
  });
}

m2d_status m2d_sigma_delta(double s, double* sigma, double* delta) {
  if (!sigma || !delta) return null_argument("sigma/delta");
  return guarded([&] {
    const auto sd = m2d::spectral::sigma_delta(s);
    *sigma = sd.sigma;
    *delta = sd.delta;
  });
}

m2d_status m2d_diagonalization_residual(const double eps_inv[3], const double xi[3], double* out) {
  if (!eps_inv || !xi || !out) return null_argument("eps_inv/xi/out");
  return guarded([&] {
    const m2d::SymbolPack s = m2d::assemble_symbols(m2d::Sym2{eps_inv[0], eps_inv[1], eps_inv[2]}, xi);
    *out = m2d::diagonalization_residual(s) / m2d::frobenius(s.p);
  });
}

}  // extern "C"
