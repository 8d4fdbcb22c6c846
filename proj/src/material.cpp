#include "material.hpp"

#include <algorithm>
#include <cmath>

#include "spectral.hpp"

namespace m2d {

double Sym2::min_eig() const {
  double h = 0.5 * (a11 + a22);
  return h - std::hypot(0.5 * (a11 - a22), a12);
}

double Sym2::max_eig() const {
  double h = 0.5 * (a11 + a22);
  return h + std::hypot(0.5 * (a11 - a22), a12);
}

Sym2 Sym2::inverse() const {
  double dt = det();
  if (!(std::abs(dt) > 0)) fail_numeric("Sym2: singular matrix");
  return {a22 / dt, -a12 / dt, a11 / dt};
}

CoefficientSet coefficient_set(const Sym2& eps_inv) { return {eps_inv, eps_inv.inverse(), eps_inv.adjugate()}; }

// ---------------------------------------------------------------- series

double FourierSeries2::wavenumber(size_t i) const {
  return 2 * kPi / period * std::hypot(double(modes[i][0]), double(modes[i][1]));
}

namespace {

struct PhaseTable {
  int m1 = 0, m2 = 0;
  CVec e1, e2;  // exp(i k n x) for n in [-m, m]
  PhaseTable(const FourierSeries2& s, double x1, double x2) {
    for (const auto& n : s.modes) {
      m1 = std::max(m1, std::abs(n[0]));
      m2 = std::max(m2, std::abs(n[1]));
    }
    const double w = 2 * kPi / s.period;
    e1.resize(2 * m1 + 1);
    e2.resize(2 * m2 + 1);
    for (int n = -m1; n <= m1; ++n) e1[n + m1] = std::polar(1.0, w * n * x1);
    for (int n = -m2; n <= m2; ++n) e2[n + m2] = std::polar(1.0, w * n * x2);
  }
  cplx at(const std::array<int, 2>& n) const { return e1[n[0] + m1] * e2[n[1] + m2]; }
};

void set_entry(Sym2& s, int e, double v) {
  if (e == 0) s.a11 = v;
  else if (e == 1) s.a12 = v;
  else s.a22 = v;
}

double get_entry(const Sym2& s, int e) { return e == 0 ? s.a11 : (e == 1 ? s.a12 : s.a22); }

}  // namespace

Sym2 FourierSeries2::value(double x1, double x2) const {
  Sym2 v = base;
  if (modes.empty()) return v;
  PhaseTable t(*this, x1, x2);
  double acc[3] = {0, 0, 0};
  for (size_t i = 0; i < modes.size(); ++i) {
    cplx e = t.at(modes[i]);
    for (int c = 0; c < 3; ++c) acc[c] += 2 * (coef[c][i] * e).real();
  }
  for (int c = 0; c < 3; ++c) set_entry(v, c, get_entry(base, c) + acc[c]);
  return v;
}

void FourierSeries2::jet(double x1, double x2, Sym2& v, Sym2& d1, Sym2& d2) const {
  v = base;
  d1 = {0, 0, 0};
  d2 = {0, 0, 0};
  if (modes.empty()) return;
  PhaseTable t(*this, x1, x2);
  const double w = 2 * kPi / period;
  double a[3] = {0, 0, 0}, b1[3] = {0, 0, 0}, b2[3] = {0, 0, 0};
  for (size_t i = 0; i < modes.size(); ++i) {
    cplx e = t.at(modes[i]);
    double k1 = w * modes[i][0], k2 = w * modes[i][1];
    for (int c = 0; c < 3; ++c) {
      cplx z = coef[c][i] * e;
      a[c] += 2 * z.real();
      // d/dx of 2 Re(z) = 2 Re(i k z) = -2 k Im(z)
      b1[c] -= 2 * k1 * z.imag();
      b2[c] -= 2 * k2 * z.imag();
    }
  }
  for (int c = 0; c < 3; ++c) {
    set_entry(v, c, get_entry(base, c) + a[c]);
    set_entry(d1, c, b1[c]);
    set_entry(d2, c, b2[c]);
  }
}

GridSpec spatial_grid(const GridSpec& g) {
  if (!g.includes_time) return g;
  std::vector<double> e(g.extent.begin() + 1, g.extent.end());
  std::vector<int> p(g.points.begin() + 1, g.points.end());
  return make_grid(e, p, false);
}

std::array<RVec, 3> FourierSeries2::on_grid(const GridSpec& g0) const {
  GridSpec g = spatial_grid(g0);
  if (g.ndim() != 2) fail("coefficient sampling needs two spatial axes");
  const int n1 = g.points[0], n2 = g.points[1];
  int mult[2] = {1, 1};
  if (!modes.empty()) {
    for (int a = 0; a < 2; ++a) {
      double r = g.extent[a] / period;
      mult[a] = static_cast<int>(std::lround(r));
      if (mult[a] < 1 || std::abs(r - mult[a]) > 1e-9 * r)
        fail("coefficient sampling: grid extent must be a multiple of the coefficient period");
    }
  }
  std::array<RVec, 3> out;
  for (int c = 0; c < 3; ++c) {
    CVec bins(g.size(), 0.0);
    for (size_t i = 0; i < modes.size(); ++i) {
      long b1 = ((long(modes[i][0]) * mult[0]) % n1 + n1) % n1;
      long b2 = ((long(modes[i][1]) * mult[1]) % n2 + n2) % n2;
      bins[b1 * n2 + b2] += coef[c][i];
      bins[((n1 - b1) % n1) * n2 + (n2 - b2) % n2] += std::conj(coef[c][i]);
    }
    const double scale = static_cast<double>(g.size());
    for (auto& z : bins) z *= scale;
    fft_inverse(g, bins);
    out[c].resize(g.size());
    const double b = get_entry(base, c);
    for (size_t k = 0; k < g.size(); ++k) out[c][k] = b + bins[k].real();
  }
  return out;
}

// ---------------------------------------------------------------- counterexample profiles

namespace cx {

namespace {
double edge(double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; }
double edge_deriv(double t) { return t > 0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }
}  // namespace

double smooth_step(double r, double r0, double r1) {
  double u = (r - r0) / (r1 - r0);
  if (u <= 0) return 1.0;
  if (u >= 1) return 0.0;
  double a = edge(u), b = edge(1 - u);
  return b / (a + b);
}

double smooth_step_deriv(double r, double r0, double r1) {
  double u = (r - r0) / (r1 - r0);
  if (u <= 0 || u >= 1) return 0.0;
  double a = edge(u), b = edge(1 - u);
  double da = edge_deriv(u), db = -edge_deriv(1 - u);
  return (db * (a + b) - b * (da + db)) / ((a + b) * (a + b)) / (r1 - r0);
}

double plateau_square(double r) {
  r = std::abs(r);
  return r * r * smooth_step(r, 1.0, 2.0);
}

double plateau_square_deriv(double r) {
  double sg = r < 0 ? -1.0 : 1.0;
  r = std::abs(r);
  return sg * (2 * r * smooth_step(r, 1.0, 2.0) + r * r * smooth_step_deriv(r, 1.0, 2.0));
}

double g_quadratic(double y, double lambda, double sigma) { return 1 + std::pow(lambda, 2 * sigma) * y * y; }

double g_quadratic_deriv(double y, double lambda, double sigma) { return 2 * std::pow(lambda, 2 * sigma) * y; }

double g_smooth(double y, double lambda, double sigma, double delta) {
  return 1 + std::pow(lambda, 2 * sigma - 2 * delta) * plateau_square(std::pow(lambda, delta) * y);
}

double g_smooth_deriv(double y, double lambda, double sigma, double delta) {
  return std::pow(lambda, 2 * sigma - delta) * plateau_square_deriv(std::pow(lambda, delta) * y);
}

}  // namespace cx

// ---------------------------------------------------------------- models

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::constant: return "constant";
    case ModelKind::synthetic_cs: return "synthetic_cs";
    case ModelKind::kerr: return "kerr";
    case ModelKind::counterexample: return "counterexample";
  }
  return "unknown";
}

Permittivity Permittivity::constant(const Sym2& eps_inv) {
  if (!(eps_inv.min_eig() > 0) || !std::isfinite(eps_inv.max_eig()))
    fail("constant permittivity must be symmetric positive definite");
  Permittivity p;
  p.kind_ = ModelKind::constant;
  p.series_.base = eps_inv;
  return p;
}

Permittivity Permittivity::synthetic(double s, uint64_t seed, double amplitude, double period, int max_mode) {
  if (!(s > 0) || !(amplitude >= 0) || !(period > 0) || max_mode < 1)
    fail("synthetic permittivity: need s > 0, amplitude >= 0, period > 0, max_mode >= 1");
  Permittivity p;
  p.kind_ = ModelKind::synthetic_cs;
  p.s_ = s;
  p.seed_ = seed;
  p.max_mode_ = max_mode;
  // Entries stay within amplitude of the identity, so the smallest eigenvalue is at least 1 - 2*amplitude.
  p.amplitude_ = std::min(amplitude, 0.25);
  auto& se = p.series_;
  se.period = period;
  se.base = {1, 0, 1};
  const double decay = s + 1.0 + 0.51;
  for (int n1 = 0; n1 <= max_mode; ++n1)
    for (int n2 = -max_mode; n2 <= max_mode; ++n2) {
      if (n1 == 0 && n2 <= 0) continue;
      if (n1 * n1 + n2 * n2 > max_mode * max_mode) continue;
      se.modes.push_back({n1, n2});
    }
  SeedSplitter split(seed);
  for (int c = 0; c < 3; ++c) {
    Rng rng(split.stream(c));
    double total = 0;
    se.coef[c].resize(se.modes.size());
    for (size_t i = 0; i < se.modes.size(); ++i) {
      double r = std::hypot(double(se.modes[i][0]), double(se.modes[i][1]));
      se.coef[c][i] = std::polar(std::pow(r, -decay), rng.uniform(0, 2 * kPi));
      total += 2 * std::abs(se.coef[c][i]);
    }
    for (auto& z : se.coef[c]) z *= p.amplitude_ / total;
  }
  return p;
}

Permittivity Permittivity::kerr(const KerrProfile& k) {
  if (!std::isfinite(k.coeff)) fail("kerr profile coefficient must be finite");
  Permittivity p;
  p.kind_ = ModelKind::kerr;
  p.kerr_ = k;
  return p;
}

Permittivity Permittivity::counterexample(double lambda, double s, bool smooth) {
  if (!(lambda >= 2)) fail("counterexample permittivity needs lambda >= 2");
  spectral::sigma_delta(s);
  Permittivity p;
  p.kind_ = ModelKind::counterexample;
  p.lambda_ = lambda;
  p.s_ = s;
  p.smooth_ = smooth;
  return p;
}

const FourierSeries2* Permittivity::series() const {
  return (kind_ == ModelKind::constant || kind_ == ModelKind::synthetic_cs) ? &series_ : nullptr;
}

std::array<double, 4> Permittivity::box() const {
  switch (kind_) {
    case ModelKind::synthetic_cs: return {0, series_.period, 0, series_.period};
    case ModelKind::counterexample: return {-1, 1, -1, 1};
    default: return {0, 1, 0, 1};
  }
}

Sym2 Permittivity::eps_inv_at(double x1, double x2) const {
  switch (kind_) {
    case ModelKind::kerr: fail("kerr permittivity needs a state; use eval_state");
    case ModelKind::counterexample: {
      auto sd = spectral::sigma_delta(s_);
      double g = smooth_ ? cx::g_smooth(x2, lambda_, sd.sigma, sd.delta) : cx::g_quadratic(x2, lambda_, sd.sigma);
      return {1, 0, g};
    }
    default: return series_.value(x1, x2);
  }
}

void Permittivity::eps_inv_jet(double x1, double x2, Sym2& v, Sym2& d1, Sym2& d2) const {
  switch (kind_) {
    case ModelKind::kerr: fail("kerr permittivity needs a state; use eval_state");
    case ModelKind::counterexample: {
      auto sd = spectral::sigma_delta(s_);
      v = eps_inv_at(x1, x2);
      d1 = {0, 0, 0};
      double dg = smooth_ ? cx::g_smooth_deriv(x2, lambda_, sd.sigma, sd.delta)
                          : cx::g_quadratic_deriv(x2, lambda_, sd.sigma);
      d2 = {0, 0, dg};
      return;
    }
    default: series_.jet(x1, x2, v, d1, d2);
  }
}

CoefficientSet Permittivity::eval(double x1, double x2) const { return coefficient_set(eps_inv_at(x1, x2)); }

CoefficientSet Permittivity::eval_state(double u1, double u2) const {
  if (kind_ != ModelKind::kerr) fail("eval_state applies to the kerr model only");
  double psi = kerr_.psi(u1 * u1 + u2 * u2);
  if (!(psi > 0)) fail_numeric("kerr profile is not positive at the given state");
  return coefficient_set({psi, 0, psi});
}

Permittivity Permittivity::frozen(double u1, double u2) const {
  return constant(eval_state(u1, u2).eps_inv);
}

nlohmann::json Permittivity::to_json() const {
  nlohmann::json j;
  j["model"] = to_string(kind_);
  j["seed"] = seed_;
  auto& p = j["params"];
  switch (kind_) {
    case ModelKind::constant:
      p["eps_inv"] = {series_.base.a11, series_.base.a12, series_.base.a22};
      break;
    case ModelKind::synthetic_cs:
      p["s"] = s_;
      p["amplitude"] = amplitude_;
      p["period"] = series_.period;
      p["max_mode"] = max_mode_;
      break;
    case ModelKind::kerr:
      p["psi"] = {{"type", "linear"}, {"coeff", kerr_.coeff}};
      break;
    case ModelKind::counterexample:
      p["lambda"] = lambda_;
      p["s"] = s_;
      p["smooth"] = smooth_;
      break;
  }
  return j;
}

Permittivity Permittivity::from_json(const nlohmann::json& j) {
  try {
    const std::string m = j.at("model").get<std::string>();
    const nlohmann::json p = j.value("params", nlohmann::json::object());
    const uint64_t seed = j.value("seed", uint64_t{0});
    if (m == "constant") {
      auto e = p.value("eps_inv", std::vector<double>{1, 0, 1});
      if (e.size() != 3) fail("constant model: eps_inv must list (a11, a12, a22)");
      return constant({e[0], e[1], e[2]});
    }
    if (m == "synthetic_cs")
      return synthetic(p.value("s", 2.0), seed, p.value("amplitude", 0.1), p.value("period", 2 * kPi),
                       p.value("max_mode", 48));
    if (m == "kerr") {
      KerrProfile k;
      if (p.contains("psi")) {
        const auto& ps = p["psi"];
        if (ps.value("type", std::string("linear")) != "linear") fail("kerr model: only linear psi profiles");
        k.coeff = ps.value("coeff", 1.0);
      }
      return kerr(k);
    }
    if (m == "counterexample") return counterexample(p.value("lambda", 16.0), p.value("s", 2.0), p.value("smooth", true));
    fail("unknown permittivity model '" + m + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("permittivity spec: ") + e.what());
  }
}

// ---------------------------------------------------------------- probes and symbols

EllipticityReport ellipticity_probe(const Permittivity& model, int sample_count, uint64_t seed) {
  if (sample_count < 1000) fail("ellipticity_probe: need at least 1000 samples");
  Rng rng(seed);
  EllipticityReport r;
  r.lambda1 = kInf;
  r.lambda2 = -kInf;
  r.samples = sample_count;
  auto b = model.box();
  for (int i = 0; i < sample_count; ++i) {
    double a, c;
    Sym2 e;
    if (model.needs_state()) {
      // states in the unit disk
      double rad = std::sqrt(rng.uniform()), th = rng.uniform(0, 2 * kPi);
      a = rad * std::cos(th);
      c = rad * std::sin(th);
      e = model.eval_state(a, c).eps_inv;
    } else {
      a = rng.uniform(b[0], b[1]);
      c = rng.uniform(b[2], b[3]);
      e = model.eps_inv_at(a, c);
    }
    // extremes of the Rayleigh quotient over unit directions at this point
    double lo = e.min_eig(), hi = e.max_eig();
    if (!(lo > 0))
      fail_numeric("ellipticity lost at sample (" + std::to_string(a) + ", " + std::to_string(c) +
                   "): smallest eigenvalue " + std::to_string(lo));
    if (lo < r.lambda1) {
      r.lambda1 = lo;
      r.argmin = {a, c};
    }
    if (hi > r.lambda2) {
      r.lambda2 = hi;
      r.argmax = {a, c};
    }
  }
  return r;
}

SymbolPack assemble_symbols(const Sym2& e, const double* xi) {
  const double x0 = xi[0], x1 = xi[1], x2 = xi[2];
  if (std::hypot(x1, x2) < 1e-6) fail("assemble_symbols: |xi'| below 1e-6, diagonalization undefined");
  const cplx I(0, 1);
  SymbolPack s;
  const double w = std::sqrt(e.adjugate().quad(x1, x2));
  if (!(w > 0)) fail_numeric("assemble_symbols: weighted norm is not positive");
  const double s1 = x1 / w, s2 = x2 / w;
  s.weighted_norm = w;
  s.xi_star = {s1, s2};
  s.q = x0 - w;
  s.p = {{{I * x0, 0.0, -I * x2},
          {0.0, I * x0, I * x1},
          {-I * x2 * e.a11 + I * x1 * e.a12, I * x1 * e.a22 - I * x2 * e.a12, I * x0}}};
  s.d = {{{I * x0, 0.0, 0.0}, {0.0, I * (x0 - w), 0.0}, {0.0, 0.0, I * (x0 + w)}}};
  s.m = {{{-s1 * e.a22 + s2 * e.a12, s2, -s2}, {s1 * e.a12 - s2 * e.a11, -s1, s1}, {0.0, 1.0, 1.0}}};
  s.m_inv = {{{-s1, -s2, 0.0},
              {0.5 * (s2 * e.a11 - s1 * e.a12), 0.5 * (-s1 * e.a22 + s2 * e.a12), 0.5},
              {0.5 * (-s2 * e.a11 + s1 * e.a12), 0.5 * (s1 * e.a22 - s2 * e.a12), 0.5}}};
  return s;
}

SymbolPack assemble_symbols(const CoefficientField& c, const double* x, const double* xi) {
  return assemble_symbols(c.eps_inv_at(x[1], x[2]), xi);
}

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

double frobenius(const Mat3& a) {
  double s = 0;
  for (const auto& row : a)
    for (const auto& z : row) s += std::norm(z);
  return std::sqrt(s);
}

double diagonalization_residual(const SymbolPack& s) {
  Mat3 r = matmul(matmul(s.m, s.d), s.m_inv);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r[i][j] -= s.p[i][j];
  return frobenius(r);
}

// ---------------------------------------------------------------- truncation

TruncatedCoefficient::TruncatedCoefficient(GridSpec grid, FourierSeries2 series, double nu, double l1b, double l1a)
    : grid_(std::move(grid)), series_(std::move(series)), nu_(nu), l1_before_(l1b), l1_after_(l1a) {
  samples_ = series_.on_grid(grid_);
}

namespace {
double grid_min_eig(const std::array<RVec, 3>& s) {
  double m = kInf;
  for (size_t i = 0; i < s[0].size(); ++i) m = std::min(m, Sym2{s[0][i], s[1][i], s[2][i]}.min_eig());
  return m;
}
}  // namespace

TruncatedCoefficient truncate_coefficient(const Permittivity& model, const GridSpec& grid, double nu) {
  const FourierSeries2* src = model.series();
  if (!src) fail("truncate_coefficient: model '" + to_string(model.kind()) + "' is not a periodic coefficient field");
  GridSpec sg = spatial_grid(grid);
  if (sg.ndim() != 2) fail("truncate_coefficient: need two spatial axes");
  if (!(nu > 0) || nu > std::min(sg.nyquist(0), sg.nyquist(1)))
    fail("truncate_coefficient: cutoff must lie in (0, Nyquist]");
  const double before = grid_min_eig(src->on_grid(sg));
  FourierSeries2 out;
  out.period = src->period;
  out.base = src->base;
  for (size_t i = 0; i < src->modes.size(); ++i) {
    double w = spectral::chi(src->wavenumber(i) / nu);
    if (w == 0) continue;
    out.modes.push_back(src->modes[i]);
    for (int c = 0; c < 3; ++c) out.coef[c].push_back(w * src->coef[c][i]);
  }
  const double after = grid_min_eig(out.on_grid(sg));
  if (after < 0.5 * before)
    fail_numeric("truncate_coefficient: ellipticity fell from " + std::to_string(before) + " to " +
                 std::to_string(after) + " at cutoff " + std::to_string(nu) + "; use a larger frequency");
  return TruncatedCoefficient(sg, std::move(out), nu, before, after);
}

// ---------------------------------------------------------------- Hamilton flow

double half_wave_symbol(const CoefficientField& c, const PhasePoint& p) {
  Sym2 adj = c.eps_inv_at(p.x[1], p.x[2]).adjugate();
  return p.xi[0] - std::sqrt(adj.quad(p.xi[1], p.xi[2]));
}

namespace {

using State6 = std::array<double, 6>;

State6 flow_rhs(const CoefficientField& c, const State6& y) {
  Sym2 v, d1, d2;
  c.eps_inv_jet(y[1], y[2], v, d1, d2);
  const Sym2 a = v.adjugate(), a1 = d1.adjugate(), a2 = d2.adjugate();
  const double k1 = y[4], k2 = y[5];
  const double w = std::sqrt(a.quad(k1, k2));
  if (!(w > 0)) fail_numeric("hamilton_flow: weighted norm vanished");
  return {1.0,
          -(a.a11 * k1 + a.a12 * k2) / w,
          -(a.a12 * k1 + a.a22 * k2) / w,
          0.0,
          a1.quad(k1, k2) / (2 * w),
          a2.quad(k1, k2) / (2 * w)};
}

}  // namespace

FlowTrajectory hamilton_flow(const CoefficientField& c, const PhasePoint& start, const FlowOptions& opt) {
  if (opt.steps < 1) fail("hamilton_flow: need at least one step");
  if (std::hypot(start.xi[1], start.xi[2]) < 1e-6) fail("hamilton_flow: |xi'| below 1e-6");
  const double h = opt.t_final / opt.steps;
  FlowTrajectory tr;
  State6 y{start.x[0], start.x[1], start.x[2], start.xi[0], start.xi[1], start.xi[2]};
  auto push = [&] { tr.points.push_back({{y[0], y[1], y[2]}, {y[3], y[4], y[5]}}); };
  auto outside = [&] {
    if (!opt.box) return false;
    const auto& b = *opt.box;
    return y[1] < b[0] || y[1] > b[1] || y[2] < b[2] || y[2] > b[3];
  };
  push();
  for (int n = 0; n < opt.steps; ++n) {
    auto axpy = [](const State6& a, double s, const State6& b) {
      State6 r;
      for (int i = 0; i < 6; ++i) r[i] = a[i] + s * b[i];
      return r;
    };
    State6 k1 = flow_rhs(c, y);
    State6 k2 = flow_rhs(c, axpy(y, h / 2, k1));
    State6 k3 = flow_rhs(c, axpy(y, h / 2, k2));
    State6 k4 = flow_rhs(c, axpy(y, h, k3));
    for (int i = 0; i < 6; ++i) y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    if (outside()) {
      tr.exited_box = true;
      break;
    }
    push();
  }
  return tr;
}

// ---------------------------------------------------------------- Kerr algebra

std::array<std::array<double, 3>, 3> kerr_system_matrix(const KerrProfile& k, int j, double u1, double u2) {
  const double r = u1 * u1 + u2 * u2, p = k.psi(r), dp = k.dpsi(r);
  if (j == 1) return {{{0, 0, 0}, {0, 0, -1}, {-2 * dp * u1 * u2, -2 * dp * u2 * u2 - p, 0}}};
  if (j == 2) return {{{0, 0, 1}, {0, 0, 0}, {2 * dp * u1 * u1 + p, 2 * dp * u1 * u2, 0}}};
  fail("kerr_system_matrix: j must be 1 or 2");
}

std::array<std::array<double, 3>, 3> kerr_symmetrizer(const KerrProfile& k, double u1, double u2) {
  const double r = u1 * u1 + u2 * u2, p = k.psi(r), dp = k.dpsi(r);
  return {{{p + 2 * dp * u1 * u1, 2 * dp * u1 * u2, 0}, {2 * dp * u1 * u2, p + 2 * dp * u2 * u2, 0}, {0, 0, 1}}};
}

}  // namespace m2d
