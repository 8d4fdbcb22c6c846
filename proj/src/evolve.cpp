#include "evolve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "snapshot.hpp"

namespace m2d {

namespace {

void check_spatial(const GridSpec& g) {
  if (g.includes_time || g.ndim() != 2) fail("evolve: needs a spatial (x1, x2) grid");
}

void check_state(const GridSpec& g, const State& u, const char* what) {
  for (const auto& c : u)
    if (c.size() != g.size()) fail(std::string(what) + ": state size does not match the grid");
}

// Wavenumbers with Nyquist entries zeroed, and the 2/3-rule mask.
struct Modes {
  RVec k1, k2;
  std::vector<char> keep, nyquist;
  explicit Modes(const GridSpec& g) : k1(g.size()), k2(g.size()), keep(g.size()), nyquist(g.size()) {
    const int n0 = g.points[0], n1 = g.points[1];
    for (int i = 0; i < n0; ++i)
      for (int j = 0; j < n1; ++j) {
        const size_t s = static_cast<size_t>(i) * n1 + j;
        k1[s] = g.is_nyquist(0, i) ? 0.0 : g.wavenumber(0, i);
        k2[s] = g.is_nyquist(1, j) ? 0.0 : g.wavenumber(1, j);
        const int m0 = i < n0 / 2 ? i : n0 - i, m1 = j < n1 / 2 ? j : n1 - j;
        keep[s] = m0 <= n0 / 3 && m1 <= n1 / 3;
        nyquist[s] = g.is_nyquist(0, i) || g.is_nyquist(1, j);
      }
  }
};

CVec forward(const GridSpec& g, const RVec& v) {
  CVec c = to_complex(v);
  fft_forward(g, c);
  return c;
}

RVec inverse_real(const GridSpec& g, CVec c) {
  fft_inverse(g, c);
  return real_part(c);
}

double max_abs(const State& u) {
  double m = 0;
  for (const auto& c : u)
    for (double v : c) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(const State& u) {
  for (const auto& c : u)
    for (double v : c)
      if (!std::isfinite(v)) return false;
  return true;
}

// Right-hand side of the Maxwell system for a fixed coefficient law.
class MaxwellRhs {
 public:
  MaxwellRhs(const Permittivity& model, const GridSpec& g) : model_(model), g_(g), modes_(g) {
    if (!model.needs_state()) {
      for (auto& c : e_) c.resize(g.size());
      for (int i = 0; i < g.points[0]; ++i)
        for (int j = 0; j < g.points[1]; ++j) {
          const size_t s = static_cast<size_t>(i) * g.points[1] + j;
          const Sym2 e = model.eps_inv_at(g.coordinate(0, i), g.coordinate(1, j));
          e_[0][s] = e.a11;
          e_[1][s] = e.a12;
          e_[2][s] = e.a22;
        }
    }
  }

  State operator()(const State& u) const {
    const size_t n = g_.size();
    RVec E1(n), E2(n);
    if (model_.needs_state()) {
      const KerrProfile& k = model_.kerr_profile();
      for (size_t s = 0; s < n; ++s) {
        const double p = k.psi(u[0][s] * u[0][s] + u[1][s] * u[1][s]);
        E1[s] = p * u[0][s];
        E2[s] = p * u[1][s];
      }
    } else {
      for (size_t s = 0; s < n; ++s) {
        E1[s] = e_[0][s] * u[0][s] + e_[1][s] * u[1][s];
        E2[s] = e_[1][s] * u[0][s] + e_[2][s] * u[1][s];
      }
    }
    const CVec Hh = forward(g_, u[2]), E1h = forward(g_, E1), E2h = forward(g_, E2);
    const bool dealias = model_.needs_state();
    const cplx I(0, 1);
    CVec a(n), b(n), c(n);
    for (size_t s = 0; s < n; ++s) {
      const double k1 = modes_.k1[s], k2 = modes_.k2[s];
      a[s] = I * k2 * Hh[s];
      b[s] = -I * k1 * Hh[s];
      c[s] = dealias && !modes_.keep[s] ? cplx(0) : -(I * k1 * E2h[s] - I * k2 * E1h[s]);
    }
    return {inverse_real(g_, std::move(a)), inverse_real(g_, std::move(b)), inverse_real(g_, std::move(c))};
  }

 private:
  const Permittivity& model_;
  GridSpec g_;
  Modes modes_;
  std::array<RVec, 3> e_;
};

void axpy(State& y, double a, const State& x) {
  for (int c = 0; c < 3; ++c)
    for (size_t s = 0; s < y[c].size(); ++s) y[c][s] += a * x[c][s];
}

State add(const State& u, double a, const State& x) {
  State r = u;
  axpy(r, a, x);
  return r;
}

// Sum over modes of w(k) |u_hat|^2, scaled to the L2 norm squared.
double weighted_mass(const GridSpec& g, const State& u, const std::function<double(double)>& w) {
  const Modes modes(g);
  const double scale = g.cell_volume() / static_cast<double>(g.size());
  double total = 0;
  for (const auto& comp : u) {
    const CVec h = forward(g, comp);
    for (size_t s = 0; s < h.size(); ++s) {
      if (modes.nyquist[s]) continue;
      total += w(std::hypot(modes.k1[s], modes.k2[s])) * std::norm(h[s]);
    }
  }
  return total * scale;
}

std::array<RVec, 2> gradient(const GridSpec& g, const RVec& f) {
  const CVec c = to_complex(f);
  return {real_part(spectral::partial(g, c, 0)), real_part(spectral::partial(g, c, 1))};
}

double l2(const GridSpec& g, const RVec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s * g.cell_volume());
}

double l2(const GridSpec& g, const State& u) {
  double s = 0;
  for (const auto& c : u)
    for (double x : c) s += x * x;
  return std::sqrt(s * g.cell_volume());
}

}  // namespace

State zero_state(const GridSpec& g) { return {RVec(g.size(), 0.0), RVec(g.size(), 0.0), RVec(g.size(), 0.0)}; }

State state_from(const SpectralField& f) { return f.components(); }

SpectralField to_field(const GridSpec& g, const State& u) { return SpectralField(g, u); }

double max_wave_speed(const Permittivity& model, const GridSpec& g, const State& u) {
  check_spatial(g);
  double c2 = 0;
  if (model.needs_state()) {
    check_state(g, u, "max_wave_speed");
    EnergyConfig cfg;
    cfg.psi = model.kerr_profile();
    for (size_t s = 0; s < g.size(); ++s) c2 = std::max(c2, symmetrizer_block(cfg, u[0][s], u[1][s]).max_eig());
  } else {
    for (int i = 0; i < g.points[0]; ++i)
      for (int j = 0; j < g.points[1]; ++j)
        c2 = std::max(c2, model.eps_inv_at(g.coordinate(0, i), g.coordinate(1, j)).max_eig());
  }
  return std::sqrt(c2);
}

Trajectory simulate(const Permittivity& model, const GridSpec& g, const State& u0, double T, double dt,
                    const SourceFn& source, const SimulateOptions& opt) {
  check_spatial(g);
  check_state(g, u0, "simulate");
  if (!(dt != 0) || !std::isfinite(dt) || !std::isfinite(T) || T * dt <= 0)
    fail("simulate: T and dt must be nonzero, finite and of the same sign");
  if (opt.save_every < 1) fail("simulate: save_every must be >= 1");
  const long steps = std::lround(T / dt);
  if (std::abs(steps * dt - T) > 1e-9 * std::abs(T)) fail("simulate: T must be an integer multiple of dt");
  if (steps % opt.save_every != 0) fail("simulate: the step count must be a multiple of save_every");

  // Dealiasing margin: no content above 2/3 of Nyquist.
  const Modes modes(g);
  double total = 0, outside = 0;
  for (const auto& c : u0) {
    const CVec h = forward(g, c);
    for (size_t s = 0; s < h.size(); ++s) {
      total += std::norm(h[s]);
      if (!modes.keep[s]) outside += std::norm(h[s]);
    }
  }
  if (outside > 1e-20 * total) fail("simulate: initial data is not band-limited below 2/3 of the Nyquist frequency");

  const double h = std::min(g.spacing(0), g.spacing(1));
  const double speed = max_wave_speed(model, g, u0);
  if (std::abs(dt) > opt.cfl * h / speed)
    fail("simulate: dt = " + std::to_string(std::abs(dt)) + " violates the CFL limit " +
         std::to_string(opt.cfl * h / speed));

  Trajectory tr;
  tr.grid = g;
  tr.dt = dt;
  tr.model = model.to_json();
  tr.max_speed = speed;
  MaxwellRhs rhs(model, g);
  auto with_source = [&](State k, double t) {
    if (source) {
      const State f = source(t);
      check_state(g, f, "simulate source");
      axpy(k, 1.0, f);
    }
    return k;
  };
  auto store = [&](double t, const State& u) {
    tr.times.push_back(t);
    tr.states.push_back(u);
    if (source) tr.sources.push_back(source(t));
  };

  State u = u0;
  store(0.0, u);
  for (long n = 0; n < steps; ++n) {
    const double t = n * dt;
    const State k1 = with_source(rhs(u), t);
    const State k2 = with_source(rhs(add(u, dt / 2, k1)), t + dt / 2);
    const State k3 = with_source(rhs(add(u, dt / 2, k2)), t + dt / 2);
    const State k4 = with_source(rhs(add(u, dt, k3)), t + dt);
    axpy(u, dt / 6, k1);
    axpy(u, dt / 3, k2);
    axpy(u, dt / 3, k3);
    axpy(u, dt / 6, k4);
    if (!all_finite(u)) fail_numeric("simulate: non-finite value at step " + std::to_string(n + 1));
    if (max_abs(u) > opt.blowup)
      fail_numeric("simulate: max |u| exceeded " + std::to_string(opt.blowup) + " at step " + std::to_string(n + 1));
    if ((n + 1) % opt.save_every == 0) store((n + 1) * dt, u);
  }
  return tr;
}

RVec charge_density(const GridSpec& g, const State& u) {
  check_spatial(g);
  const auto d1 = gradient(g, u[0]), d2 = gradient(g, u[1]);
  RVec r(g.size());
  for (size_t s = 0; s < r.size(); ++s) r[s] = d1[0][s] + d2[1][s];
  return r;
}

ChargeReport charge_check(const Trajectory& traj, const SourceFn& source) {
  if (traj.states.empty()) fail("charge_check: empty trajectory");
  if (!source && !traj.sources.empty()) fail("charge_check: the trajectory was run with a source; pass it");
  const GridSpec& g = traj.grid;
  ChargeReport rep;
  rep.u0_h1 = sobolev_norm(g, traj.states[0], 1.0);
  const RVec rho0 = charge_density(g, traj.states[0]);
  RVec predicted = rho0;
  // 3-point Gauss-Legendre nodes and weights on [0, 1].
  const double gx[3] = {0.5 - std::sqrt(0.15), 0.5, 0.5 + std::sqrt(0.15)};
  const double gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  for (size_t i = 0; i < traj.states.size(); ++i) {
    if (i > 0 && source) {
      const double t0 = traj.times[i - 1], span = traj.times[i] - t0;
      for (int q = 0; q < 3; ++q) {
        const State f = source(t0 + gx[q] * span);
        const RVec div = charge_density(g, f);
        for (size_t s = 0; s < div.size(); ++s) predicted[s] += gw[q] * span * div[s];
      }
    }
    const RVec rho = charge_density(g, traj.states[i]);
    RVec d(rho.size()), e(rho.size());
    for (size_t s = 0; s < rho.size(); ++s) {
      d[s] = rho[s] - predicted[s];
      e[s] = rho[s] - rho0[s];
    }
    rep.times.push_back(traj.times[i]);
    rep.defect.push_back(l2(g, d));
    rep.drift.push_back(l2(g, e));
    rep.max_defect = std::max(rep.max_defect, rep.defect.back());
    rep.max_drift = std::max(rep.max_drift, rep.drift.back());
  }
  return rep;
}

EnergyConfig energy_config(const Permittivity& model, double s) {
  EnergyConfig cfg;
  cfg.s = s;
  switch (model.kind()) {
    case ModelKind::kerr: cfg.psi = model.kerr_profile(); break;
    case ModelKind::constant: cfg.eps_inv = model.eps_inv_at(0, 0); break;
    default: fail("energy_config: the energy functional is defined for constant and Kerr models");
  }
  return cfg;
}

Sym2 symmetrizer_block(const EnergyConfig& cfg, double u1, double u2) {
  if (cfg.eps_inv) return *cfg.eps_inv;
  const auto C = kerr_symmetrizer(cfg.psi, u1, u2);
  return {C[0][0], C[0][1], C[1][1]};
}

double sobolev_norm(const GridSpec& g, const State& u, double s) {
  check_spatial(g);
  check_state(g, u, "sobolev_norm");
  return std::sqrt(weighted_mass(g, u, [s](double r) { return std::pow(1 + r * r, s); }));
}

double energy_norm(const GridSpec& g, const State& u, const EnergyConfig& cfg) {
  check_spatial(g);
  check_state(g, u, "energy_norm");
  if (!(cfg.s >= 0)) fail("energy_norm: s must be >= 0");
  State w = u;
  if (cfg.s > 0)
    for (auto& c : w)
      c = real_part(spectral::multiplier(g, to_complex(c), [&](const double* k) {
        return cplx(std::pow(1 + k[0] * k[0] + k[1] * k[1], cfg.s / 2));
      }));
  double total = 0;
  const int n1 = g.points[1];
  for (size_t s = 0; s < g.size(); ++s) {
    const Sym2 C = symmetrizer_block(cfg, u[0][s], u[1][s]);
    if (!(C.min_eig() > 0)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "energy_norm: symmetrizer not positive at x = (%.6g, %.6g), min eigenvalue %.3g",
                    g.coordinate(0, static_cast<int>(s / n1)), g.coordinate(1, static_cast<int>(s % n1)),
                    C.min_eig());
      fail_numeric(buf);
    }
    total += C.quad(w[0][s], w[1][s]) + w[2][s] * w[2][s];
  }
  return total * g.cell_volume();
}

ControlParams control_params(const Trajectory& traj) {
  const GridSpec& g = traj.grid;
  ControlParams cp;
  double A = 0;
  for (size_t i = 0; i < traj.states.size(); ++i) {
    const State& u = traj.states[i];
    A = std::max(A, max_abs(u));
    double B = 0;
    for (const auto& c : u) {
      const auto d = gradient(g, c);
      for (size_t s = 0; s < c.size(); ++s) B = std::max(B, std::hypot(d[0][s], d[1][s]));
    }
    cp.times.push_back(traj.times[i]);
    cp.A.push_back(A);
    cp.B.push_back(B);
    cp.int_B.push_back(i == 0 ? 0.0 : cp.int_B.back() + 0.5 * (traj.times[i] - traj.times[i - 1]) * (B + cp.B[i - 1]));
  }
  return cp;
}

GronwallFit energy_gronwall_check(const Trajectory& traj, const EnergyConfig& cfg) {
  if (traj.states.size() < 2) fail("energy_gronwall_check: trajectory needs at least two states");
  const GridSpec& g = traj.grid;
  const ControlParams cp = control_params(traj);
  GronwallFit fit;
  for (const auto& u : traj.states) fit.energy.push_back(energy_norm(g, u, cfg));
  const double E0 = fit.energy[0];
  if (!(E0 > 0)) fail_numeric("energy_gronwall_check: E^s(u(0)) = 0, the fit is undefined");
  fit.times = cp.times;
  fit.int_B = cp.int_B;
  bool any = false;
  for (size_t i = 0; i < fit.energy.size(); ++i) {
    fit.log_ratio.push_back(std::log(fit.energy[i] / E0));
    if (i > 0 && cp.int_B[i] > 0) {
      const double c = fit.log_ratio[i] / cp.int_B[i];
      fit.c = any ? std::max(fit.c, c) : c;
      any = true;
    }
  }
  for (size_t i = 0; i < fit.energy.size(); ++i) fit.margin.push_back(fit.c * fit.int_B[i] - fit.log_ratio[i]);
  return fit;
}

FrequencyEnvelope frequency_envelope(const GridSpec& g, const State& u, double s, double delta) {
  check_spatial(g);
  check_state(g, u, "frequency_envelope");
  if (!(delta > 0 && delta <= 1)) fail("frequency_envelope: delta must lie in (0, 1]");
  FrequencyEnvelope env;
  env.s = s;
  env.delta = delta;
  const int j_hi = spectral::resolved_blocks(g, spectral::BlockKind::spatial).j_hi;
  for (int j = -1; j <= j_hi; ++j) {
    env.blocks.push_back(j);
    env.block_norms.push_back(std::sqrt(weighted_mass(g, u, [&](double r) {
      const double b = j < 0 ? spectral::low_bump(r) : spectral::bump(r / std::ldexp(1.0, j));
      return b * b * std::pow(1 + r * r, s);
    })));
  }
  env.norm = sobolev_norm(g, u, s);
  const size_t nb = env.blocks.size();
  env.c.assign(nb, 0.0);
  double sum = 0;
  for (size_t k = 0; k < nb; ++k) {
    for (size_t j = 0; j < nb; ++j) {
      const int gap = std::abs(env.blocks[j] - env.blocks[k]);
      env.c[k] = std::max(env.c[k], std::pow(2.0, -delta * gap) * env.block_norms[j]);
    }
    sum += env.c[k] * env.c[k];
  }
  env.sharpness = env.norm > 0 ? sum / (env.norm * env.norm) : 0.0;
  return env;
}

DifferenceReport difference_bound_check(const Permittivity& model, const GridSpec& g, const State& a0,
                                        const State& b0, double T, double dt) {
  const Trajectory ta = simulate(model, g, a0, T, dt), tb = simulate(model, g, b0, T, dt);
  const ControlParams ca = control_params(ta), cb = control_params(tb);
  DifferenceReport rep;
  State d0 = a0;
  axpy(d0, -1.0, b0);
  const double n0 = l2(g, d0);
  double intB = 0;
  for (size_t i = 0; i < ta.states.size(); ++i) {
    if (i > 0)
      intB += 0.5 * (ta.times[i] - ta.times[i - 1]) *
              (std::max(ca.B[i], cb.B[i]) + std::max(ca.B[i - 1], cb.B[i - 1]));
    State d = ta.states[i];
    axpy(d, -1.0, tb.states[i]);
    const double r = n0 > 0 ? l2(g, d) / n0 : 1.0;
    rep.times.push_back(ta.times[i]);
    rep.ratio.push_back(r);
    rep.max_ratio = std::max(rep.max_ratio, r);
    if (i > 0 && intB > 0 && n0 > 0) rep.c = std::max(rep.c, std::log(r * r) / intB);
  }
  rep.int_B = intB;
  return rep;
}

void write_trajectory(const std::string& dir, const Trajectory& traj, const nlohmann::json& extra) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "write_trajectory: cannot create " + dir + ": " + ec.message());
  nlohmann::json man;
  man["model"] = traj.model;
  man["dt"] = traj.dt;
  man["T"] = traj.times.empty() ? 0.0 : traj.times.back();
  man["grid"] = {{"extent", traj.grid.extent}, {"points", traj.grid.points}};
  man["times"] = traj.times;
  man["has_source"] = !traj.sources.empty();
  auto& files = man["snapshots"];
  files = nlohmann::json::array();
  for (size_t i = 0; i < traj.states.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "state_%05zu.bin", i);
    write_field_snapshot((fs::path(dir) / name).string(), to_field(traj.grid, traj.states[i]));
    files.push_back(name);
  }
  if (!extra.is_null()) man["extra"] = extra;
  std::ofstream os(fs::path(dir) / "manifest.json");
  if (!os) throw Error(ErrorKind::Io, "write_trajectory: cannot write manifest in " + dir);
  os << man.dump(2) << "\n";
}

}  // namespace m2d
