#include "sharpness.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <sstream>
#include <thread>

#include "spectral.hpp"

namespace m2d {

namespace {

double raw_bump(double r) {
  double u = 2 * r - 3;
  if (std::abs(u) >= 1) return 0.0;
  return std::exp(-1.0 / (1.0 - u * u));
}

double bump_normalizer() {
  static const double c = [] {
    RVec x, w;
    gauss_legendre(400, 1.0, 2.0, x, w);
    double s = 0;
    for (size_t k = 0; k < x.size(); ++k) s += w[k] * raw_bump(x[k]);
    return 1.0 / s;
  }();
  return c;
}

}  // namespace

// ---------------------------------------------------------------- params

double CounterexampleParams::log_lambda() const { return std::log(lambda); }
double CounterexampleParams::beta(double r) const { return bump_normalizer() * raw_bump(r); }

double CounterexampleParams::phi(double x, double y) const { return cx::smooth_step(std::hypot(x, y), 0.25, 0.5); }

double CounterexampleParams::phi_dy(double x, double y) const {
  double r = std::hypot(x, y);
  if (r == 0) return 0.0;
  return cx::smooth_step_deriv(r, 0.25, 0.5) * y / r;
}

double CounterexampleParams::chi(double r) const { return cx::smooth_step(r, 0.5, 0.75); }
double CounterexampleParams::a(double r) const { return cx::plateau_square(r); }

double CounterexampleParams::g(double y) const {
  return smooth_g ? cx::g_smooth(y, lambda, sigma, delta) : cx::g_quadratic(y, lambda, sigma);
}

double CounterexampleParams::g_dy(double y) const {
  return smooth_g ? cx::g_smooth_deriv(y, lambda, sigma, delta) : cx::g_quadratic_deriv(y, lambda, sigma);
}

double CounterexampleParams::g_quadratic(double y) const { return cx::g_quadratic(y, lambda, sigma); }

double CounterexampleParams::x_scale() const {
  double L = log_lambda();
  return L * L * lambda;
}

double CounterexampleParams::y_scale() const { return log_lambda() * std::pow(lambda, delta); }

nlohmann::json CounterexampleParams::to_json() const {
  return {{"lambda", lambda}, {"s", s}, {"sigma", sigma}, {"delta", delta}, {"smooth_g", smooth_g}};
}

CounterexampleParams counterexample_params(double lambda, double s, bool smooth_g) {
  if (!(lambda >= 2)) fail("counterexample: lambda must be >= 2");
  if (!(s >= 1 && s <= 2)) fail("counterexample: s must lie in [1, 2]");
  CounterexampleParams p;
  p.lambda = lambda;
  p.s = s;
  auto sd = spectral::sigma_delta(s);
  p.sigma = sd.sigma;
  p.delta = sd.delta;
  p.smooth_g = smooth_g;
  return p;
}

RQuadrature r_quadrature(const CounterexampleParams& p, double x_reach) {
  // Phase r' xi with xi = L^2 lambda |x - t| over r' in [1, 2].
  double xi = p.x_scale() * x_reach;
  int n = std::max(p.min_r_nodes, static_cast<int>(std::ceil(0.4 * xi)) + 32);
  if (n > 16384) fail("r_quadrature: window too wide for the oscillatory r-integral (" + std::to_string(n) + " nodes)");
  RVec x, w;
  gauss_legendre(n, 1.0, 2.0, x, w);
  const double L2 = p.log_lambda() * p.log_lambda();
  RQuadrature q;
  q.r.resize(n);
  q.w.resize(n);
  for (int k = 0; k < n; ++k) {
    q.r[k] = L2 * x[k];
    q.w[k] = w[k] * p.beta(x[k]);
  }
  return q;
}

// ---------------------------------------------------------------- H samples

RVec FieldBox::xs() const {
  RVec v(grid.points[0]);
  for (int i = 0; i < grid.points[0]; ++i) v[i] = x0 + grid.coordinate(0, i);
  return v;
}

RVec FieldBox::ys() const {
  RVec v(grid.points[1]);
  for (int j = 0; j < grid.points[1]; ++j) v[j] = y0 + grid.coordinate(1, j);
  return v;
}

void check_resolution(const CounterexampleParams& p, double dx, double dy) {
  double need_x = 0.25 / p.x_scale(), need_y = 0.125 / p.y_scale();
  if (dx > need_x * (1 + 1e-12) || dy > need_y * (1 + 1e-12)) {
    std::ostringstream os;
    os << "counterexample grid under-resolved at lambda=" << p.lambda << ": dx=" << dx << " (need <= " << need_x
       << "), dy=" << dy << " (need <= " << need_y << ")";
    fail(os.str());
  }
}

FieldBox field_box(const CounterexampleParams& p, double xi_half, double eta_half) {
  // Scaled spacings 1/4 and 1/8, the coarsest the resolution rule allows.
  int nx = static_cast<int>(std::ceil(8 * xi_half / 2)) * 2;
  int ny = static_cast<int>(std::ceil(16 * eta_half / 2)) * 2;
  double dx = 0.25 / p.x_scale(), dy = 0.125 / p.y_scale();
  FieldBox b;
  b.grid = make_grid({nx * dx, ny * dy}, {nx, ny}, false);
  b.x0 = -0.5 * nx * dx;
  b.y0 = -0.5 * ny * dy;
  b.xi_step = 0.25;
  b.eta_step = 0.125;
  return b;
}

namespace {

// Tensor sum over r-nodes with phases r' (tau - xi) evaluated in extended precision; xi = L^2 lambda x.
CVec tensor_eval(const CounterexampleParams& p, const std::vector<long double>& xi, const RVec& ys, double t,
                 HKind kind) {
  const size_t nx = xi.size(), ny = ys.size();
  CVec out(nx * ny, 0.0);
  if (nx == 0 || ny == 0) return out;
  const long double tau = static_cast<long double>(t) * p.x_scale();
  long double reach = 0;
  for (long double v : xi) {
    reach = std::max(reach, std::abs(tau - v));
    if (kind == HKind::time_integral_dx || kind == HKind::time_integral_dy) reach = std::max(reach, std::abs(v));
  }
  RQuadrature q = r_quadrature(p, static_cast<double>(reach) / p.x_scale());
  const int n = static_cast<int>(q.r.size());
  const double L2 = p.log_lambda() * p.log_lambda();
  const double lam = p.lambda, half_sig = 0.5 * std::pow(lam, p.sigma), l2d = std::pow(lam, 2 * p.delta);
  const cplx I(0, 1);
  Eigen::MatrixXcd X(nx, n), Y(n, ny);
  for (int k = 0; k < n; ++k) {
    const double r = q.r[k], om = r * lam + half_sig, ak = r * l2d;
    const long double rs = static_cast<long double>(r) / L2;
    // e^{i r lambda t} enters through the phase below; only e^{i lambda^sigma t / 2} is left here.
    const cplx es = std::polar(1.0, half_sig * t);
    const cplx et = std::polar(1.0, static_cast<double>(std::fmod(rs * tau, 2 * static_cast<long double>(kPi)))) * es;
    cplx c;
    bool ylin = false, at_t = true;
    switch (kind) {
      case HKind::value: c = q.w[k] * es; break;
      case HKind::dt: c = q.w[k] * I * om * es; break;
      case HKind::dtt: c = -q.w[k] * om * om * es; break;
      case HKind::x_antideriv: c = -q.w[k] * om / (r * lam) * es; break;
      case HKind::x_antideriv_dy:
        c = q.w[k] * om / (r * lam) * ak * es;
        ylin = true;
        break;
      case HKind::time_integral_dx:
        c = q.w[k] * (-I * r * lam) * (et - 1.0) / (I * om);
        at_t = false;
        break;
      case HKind::time_integral_dy:
        c = q.w[k] * (-ak) * (et - 1.0) / (I * om);
        ylin = true;
        at_t = false;
        break;
    }
    for (size_t i = 0; i < nx; ++i) {
      const long double th = rs * ((at_t ? tau : 0.0L) - xi[i]);
      X(i, k) = c * cplx(static_cast<double>(std::cos(th)), static_cast<double>(std::sin(th)));
    }
    for (size_t j = 0; j < ny; ++j) Y(k, j) = (ylin ? ys[j] : 1.0) * std::exp(-0.5 * ak * ys[j] * ys[j]);
  }
  Eigen::MatrixXcd R = X * Y;
  for (size_t i = 0; i < nx; ++i)
    for (size_t j = 0; j < ny; ++j) out[i * ny + j] = R(i, j);
  return out;
}

}  // namespace

CVec h_samples(const CounterexampleParams& p, const RVec& xs, const RVec& ys, double t, HKind kind) {
  std::vector<long double> xi(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) xi[i] = static_cast<long double>(xs[i]) * p.x_scale();
  return tensor_eval(p, xi, ys, t, kind);
}

CVec build_h_field(const CounterexampleParams& p, const FieldBox& box, double t) {
  if (box.grid.ndim() != 2 || box.grid.includes_time) fail("build_h_field: need a 2-D spatial box");
  check_resolution(p, box.grid.spacing(0), box.grid.spacing(1));
  if (box.xi_step <= 0) return h_samples(p, box.xs(), box.ys(), t, HKind::value);
  const int nx = box.grid.points[0];
  std::vector<long double> xi(nx);
  for (int i = 0; i < nx; ++i) xi[i] = static_cast<long double>(i - nx / 2) * box.xi_step;
  return tensor_eval(p, xi, box.ys(), t, HKind::value);
}

double mass_outside_box(const CounterexampleParams& p, const FieldBox& box, const CVec& h, double c) {
  RVec xs = box.xs(), ys = box.ys();
  const int nx = box.grid.points[0], ny = box.grid.points[1];
  auto xi = [&](int i) { return box.xi_step > 0 ? (i - nx / 2) * box.xi_step : xs[i] * p.x_scale(); };
  auto eta = [&](int j) { return box.eta_step > 0 ? (j - ny / 2) * box.eta_step : ys[j] * p.y_scale(); };
  double tot = 0, out = 0;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      double m = std::norm(h[static_cast<size_t>(i) * ny + j]);
      tot += m;
      if (std::abs(xi(i)) > c || std::abs(eta(j)) > c) out += m;
    }
  return tot > 0 ? out / tot : 0.0;
}

double mass_half_width(const FieldBox& box, const CVec& h, double fraction) {
  RVec xs = box.xs();
  const size_t ny = box.grid.points[1];
  std::vector<std::pair<double, double>> col(xs.size());
  double tot = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    double m = 0;
    for (size_t j = 0; j < ny; ++j) m += std::norm(h[i * ny + j]);
    col[i] = {std::abs(xs[i]), m};
    tot += m;
  }
  if (tot == 0) return 0.0;
  std::sort(col.begin(), col.end());
  // Linear interpolation of the cumulative mass in |x|.
  double acc = 0, prev_x = 0;
  for (const auto& [ax, m] : col) {
    if (acc + m >= fraction * tot) {
      double f = m > 0 ? (fraction * tot - acc) / m : 1.0;
      return prev_x + f * (ax - prev_x);
    }
    acc += m;
    prev_x = ax;
  }
  return col.back().first;
}

WaveResidual wave_equation_residual(const CounterexampleParams& p, const FieldBox& box, const CVec& h,
                                    bool quadratic) {
  RVec xs = box.xs(), ys = box.ys();
  CVec htt;
  if (box.xi_step > 0) {
    const int nx = box.grid.points[0];
    std::vector<long double> xi(nx);
    for (int i = 0; i < nx; ++i) xi[i] = static_cast<long double>(i - nx / 2) * box.xi_step;
    htt = tensor_eval(p, xi, ys, 0.0, HKind::dtt);
  } else {
    htt = h_samples(p, xs, ys, 0.0, HKind::dtt);
  }
  CVec dxx = spectral::partial(box.grid, spectral::partial(box.grid, h, 0), 0);
  CVec dyy = spectral::partial(box.grid, spectral::partial(box.grid, h, 1), 1);
  const double z = 0.25 * std::pow(p.lambda, 2 * p.sigma);
  const size_t ny = ys.size();
  CVec res(h.size());
  for (size_t i = 0; i < xs.size(); ++i)
    for (size_t j = 0; j < ny; ++j) {
      size_t k = i * ny + j;
      double g = quadratic ? p.g_quadratic(ys[j]) : p.g(ys[j]);
      res[k] = htt[k] + z * h[k] - g * dxx[k] - dyy[k];
    }
  WaveResidual w;
  w.residual = l2norm(res) * std::sqrt(box.grid.cell_volume());
  w.scale = 4 * z * l2norm(h) * std::sqrt(box.grid.cell_volume());
  return w;
}

double h_mixed_norm(const CounterexampleParams& p, const FieldBox& box, const CVec& h0, double pexp, double qexp,
                    int time_nodes) {
  RVec t, w;
  gauss_legendre(time_nodes, 0.0, 1.0, t, w);
  const double half_sig = 0.5 * std::pow(p.lambda, p.sigma);
  double acc = 0;
  CVec slice(h0.size());
  for (int m = 0; m < time_nodes; ++m) {
    const cplx ph = std::polar(1.0, half_sig * t[m]);
    for (size_t k = 0; k < h0.size(); ++k) slice[k] = (ph * h0[k]).real();
    double nq = spectral::lq_norm(box.grid, slice, qexp);
    acc = std::isinf(pexp) ? std::max(acc, nq) : acc + w[m] * std::pow(nq, pexp);
  }
  return std::isinf(pexp) ? acc : std::pow(acc, 1.0 / pexp);
}

// ---------------------------------------------------------------- gauge grid

bool GaugeGrid::interior(size_t i, size_t j) const {
  if (i == 0 || j == 0 || i + 1 >= x.size() || j + 1 >= y.size()) return false;
  return x[i] * x[i] + y[j] * y[j] < 1.0;
}

GridSpec GaugeGrid::core_grid() const {
  double hx = x[core_x0 + 1] - x[core_x0], hy = y[core_y0 + 1] - y[core_y0];
  return make_grid({core_nx * hx, core_ny * hy}, {core_nx, core_ny}, false);
}

RVec GaugeGrid::core(const RVec& f) const {
  RVec out(static_cast<size_t>(core_nx) * core_ny);
  for (int i = 0; i < core_nx; ++i)
    for (int j = 0; j < core_ny; ++j) out[static_cast<size_t>(i) * core_ny + j] = f[index(core_x0 + i, core_y0 + j)];
  return out;
}

GaugeGrid uniform_gauge_grid(int n_half) {
  if (n_half < 4) fail("uniform_gauge_grid: need at least 4 cells per half axis");
  GaugeGrid g;
  const double h = 1.0 / n_half;
  for (int i = 0; i <= 2 * n_half; ++i) g.x.push_back(-1.0 + i * h);
  g.y = g.x;
  g.core_nx = g.core_ny = 2 * n_half;
  return g;
}

namespace {

// Symmetric axis: 2m uniform nodes of spacing h around 0, then geometric cells out to +-1.
RVec graded_axis(double h, double core, double growth, int& core_start, int& core_n) {
  int m = std::max(4, static_cast<int>(std::floor(core / h)));
  if ((m - 0.5) * h >= 1.0 - 0.5 * h) fail("graded_gauge_grid: core does not fit inside [-1, 1]");
  RVec pos;
  double last = (m - 0.5) * h, step = h * growth;
  while (last + step < 1.0 - 0.5 * step) {
    last += step;
    pos.push_back(last);
    step *= growth;
  }
  pos.push_back(1.0);
  RVec axis;
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) axis.push_back(-*it);
  core_start = static_cast<int>(axis.size());
  for (int k = 0; k < 2 * m; ++k) axis.push_back((k - m + 0.5) * h);
  for (double v : pos) axis.push_back(v);
  core_n = 2 * m;
  return axis;
}

}  // namespace

GaugeGrid graded_gauge_grid(double hx, double hy, double x_core, double y_core, double growth) {
  if (!(hx > 0 && hy > 0 && growth > 1)) fail("graded_gauge_grid: invalid spacing or growth");
  GaugeGrid g;
  g.x = graded_axis(hx, x_core, growth, g.core_x0, g.core_nx);
  g.y = graded_axis(hy, y_core, growth, g.core_y0, g.core_ny);
  return g;
}

GaugeGrid counterexample_gauge_grid(const CounterexampleParams& p, double xi_half, double eta_half) {
  double hx = std::min(0.25 / p.x_scale(), 1.0 / 16), hy = std::min(0.125 / p.y_scale(), 1.0 / 16);
  double xc = std::min(xi_half / p.x_scale(), 0.85), yc = std::min(eta_half / p.y_scale(), 0.85);
  return graded_gauge_grid(hx, hy, xc, yc);
}

// ---------------------------------------------------------------- gauge solve

namespace {

// Interior unknowns ordered by row j, x fastest; each row is a contiguous x range.
struct GaugeSystem {
  const GaugeGrid& g;
  std::vector<int> ilo, ihi;       // per j, inclusive; ilo > ihi means empty
  std::vector<size_t> off;         // per j
  size_t n = 0;
  RVec diag, ce, cn;               // coupling to (i+1, j) and (i, j+1), zero when not interior
  RVec area;
  std::vector<long> north;         // unknown index of (i, j+1) or -1
  RVec tri_c, tri_d;               // Thomas factors per unknown

  GaugeSystem(const GaugeGrid& grid, const std::function<double(double)>& b) : g(grid) {
    const size_t nx = g.x.size(), ny = g.y.size();
    ilo.assign(ny, 1);
    ihi.assign(ny, 0);
    off.assign(ny + 1, 0);
    for (size_t j = 0; j < ny; ++j) {
      int lo = -1, hi = -2;
      for (size_t i = 0; i < nx; ++i)
        if (g.interior(i, j)) {
          if (lo < 0) lo = static_cast<int>(i);
          hi = static_cast<int>(i);
        }
      if (lo >= 0) {
        ilo[j] = lo;
        ihi[j] = hi;
      }
      off[j + 1] = off[j] + (ihi[j] >= ilo[j] ? ihi[j] - ilo[j] + 1 : 0);
    }
    n = off[ny];
    diag.assign(n, 0);
    ce.assign(n, 0);
    cn.assign(n, 0);
    area.assign(n, 0);
    north.assign(n, -1);
    RVec bmid(ny, 0);
    for (size_t j = 0; j + 1 < ny; ++j) bmid[j] = b(0.5 * (g.y[j] + g.y[j + 1]));
    for (size_t j = 1; j + 1 < ny; ++j) {
      const double dyc = 0.5 * (g.y[j + 1] - g.y[j - 1]);
      for (int i = ilo[j]; i <= ihi[j]; ++i) {
        const size_t u = off[j] + (i - ilo[j]);
        const double dxc = 0.5 * (g.x[i + 1] - g.x[i - 1]);
        const double fe = dyc / (g.x[i + 1] - g.x[i]), fw = dyc / (g.x[i] - g.x[i - 1]);
        const double fn = dxc * bmid[j] / (g.y[j + 1] - g.y[j]), fs = dxc * bmid[j - 1] / (g.y[j] - g.y[j - 1]);
        diag[u] = fe + fw + fn + fs;
        area[u] = dxc * dyc;
        if (i + 1 <= ihi[j]) ce[u] = fe;
        if (g.interior(i, j + 1)) {
          cn[u] = fn;
          north[u] = static_cast<long>(off[j + 1] + (i - ilo[j + 1]));
        }
      }
    }
    // Thomas factorization of each x-line block.
    tri_c.assign(n, 0);
    tri_d.assign(n, 0);
    for (size_t j = 0; j < ny; ++j) {
      if (ihi[j] < ilo[j]) continue;
      const size_t a = off[j], e = off[j + 1];
      tri_d[a] = diag[a];
      for (size_t u = a + 1; u < e; ++u) {
        tri_c[u - 1] = -ce[u - 1] / tri_d[u - 1];
        tri_d[u] = diag[u] + ce[u - 1] * tri_c[u - 1];
      }
    }
  }

  void apply(const RVec& v, RVec& out) const {
    for (size_t u = 0; u < n; ++u) out[u] = diag[u] * v[u];
    for (size_t u = 0; u < n; ++u) {
      if (ce[u] != 0) {
        out[u] -= ce[u] * v[u + 1];
        out[u + 1] -= ce[u] * v[u];
      }
      if (north[u] >= 0) {
        out[u] -= cn[u] * v[north[u]];
        out[north[u]] -= cn[u] * v[u];
      }
    }
  }

  void precondition(const RVec& r, RVec& z) const {
    const size_t ny = g.y.size();
    for (size_t j = 0; j < ny; ++j) {
      if (ihi[j] < ilo[j]) continue;
      const size_t a = off[j], e = off[j + 1];
      z[a] = r[a] / tri_d[a];
      for (size_t u = a + 1; u < e; ++u) z[u] = (r[u] + ce[u - 1] * z[u - 1]) / tri_d[u];
      for (size_t u = e - 1; u > a; --u) z[u - 1] -= tri_c[u - 1] * z[u];
    }
  }

  RVec gather(const RVec& full) const {
    RVec v(n);
    for (size_t j = 0; j < g.y.size(); ++j)
      for (int i = ilo[j]; i <= ihi[j]; ++i) v[off[j] + (i - ilo[j])] = full[g.index(i, j)];
    return v;
  }

  RVec scatter(const RVec& v) const {
    RVec full(g.size(), 0.0);
    for (size_t j = 0; j < g.y.size(); ++j)
      for (int i = ilo[j]; i <= ihi[j]; ++i) full[g.index(i, j)] = v[off[j] + (i - ilo[j])];
    return full;
  }
};

double dot(const RVec& a, const RVec& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

RVec solve_gauge(const GaugeGrid& grid, const std::function<double(double)>& b, const RVec& f,
                 GaugeSolveReport* report, double tol, int max_iter) {
  if (f.size() != grid.size()) fail("solve_gauge: forcing size does not match the grid");
  GaugeSystem sys(grid, b);
  GaugeSolveReport rep;
  rep.unknowns = sys.n;
  RVec rhs = sys.gather(f);
  for (size_t u = 0; u < sys.n; ++u) rhs[u] *= sys.area[u];
  const double bnorm = std::sqrt(dot(rhs, rhs));
  RVec x(sys.n, 0.0);
  if (bnorm == 0) {
    if (report) *report = rep;
    return sys.scatter(x);
  }
  RVec r = rhs, z(sys.n), pdir(sys.n), q(sys.n);
  sys.precondition(r, z);
  pdir = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    sys.apply(pdir, q);
    const double alpha = rz / dot(pdir, q);
    for (size_t u = 0; u < sys.n; ++u) {
      x[u] += alpha * pdir[u];
      r[u] -= alpha * q[u];
    }
    const double rel = std::sqrt(dot(r, r)) / bnorm;
    rep.residual_history.push_back(rel);
    rep.iterations = it;
    rep.relative_residual = rel;
    if (!std::isfinite(rel)) break;
    if (rel < tol) {
      if (report) *report = rep;
      return sys.scatter(x);
    }
    sys.precondition(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (size_t u = 0; u < sys.n; ++u) pdir[u] = z[u] + beta * pdir[u];
  }
  std::ostringstream os;
  os << "gauge solve did not reach relative residual " << tol << " in " << rep.iterations << " iterations; history:";
  const auto& h = rep.residual_history;
  for (size_t k = 0; k < h.size(); ++k)
    if (k < 5 || k + 5 >= h.size() || (k & (k - 1)) == 0) os << " [" << k + 1 << "] " << h[k];
  if (report) *report = rep;
  fail_numeric(os.str());
}

RVec apply_gauge_operator(const GaugeGrid& grid, const std::function<double(double)>& b, const RVec& psi) {
  GaugeSystem sys(grid, b);
  RVec v = sys.gather(psi), out(sys.n);
  sys.apply(v, out);
  for (size_t u = 0; u < sys.n; ++u) out[u] = -out[u] / sys.area[u];
  return sys.scatter(out);
}

double gauge_dirichlet_form(const GaugeGrid& grid, const std::function<double(double)>& b, const RVec& psi) {
  GaugeSystem sys(grid, b);
  RVec v = sys.gather(psi), out(sys.n);
  sys.apply(v, out);
  return dot(v, out);
}

double gauge_inner(const GaugeGrid& grid, const RVec& f, const RVec& g) {
  double s = 0;
  for (size_t i = 1; i + 1 < grid.x.size(); ++i)
    for (size_t j = 1; j + 1 < grid.y.size(); ++j) {
      if (!grid.interior(i, j)) continue;
      double area = 0.25 * (grid.x[i + 1] - grid.x[i - 1]) * (grid.y[j + 1] - grid.y[j - 1]);
      s += area * f[grid.index(i, j)] * g[grid.index(i, j)];
    }
  return s;
}

double gauge_l2(const GaugeGrid& grid, const RVec& f, double radius) {
  double s = 0;
  for (size_t i = 0; i < grid.x.size(); ++i)
    for (size_t j = 0; j < grid.y.size(); ++j) {
      if (std::hypot(grid.x[i], grid.y[j]) >= radius) continue;
      double wx = 0.5 * (grid.x[std::min(i + 1, grid.x.size() - 1)] - grid.x[i == 0 ? 0 : i - 1]);
      double wy = 0.5 * (grid.y[std::min(j + 1, grid.y.size() - 1)] - grid.y[j == 0 ? 0 : j - 1]);
      double v = f[grid.index(i, j)];
      s += wx * wy * v * v;
    }
  return std::sqrt(s);
}

// ---------------------------------------------------------------- full construction

CounterexampleFields build_counterexample(const CounterexampleParams& p, const BuildOptions& opt) {
  CounterexampleFields F;
  F.params = p;
  F.box = field_box(p, opt.field_xi_half, opt.eta_half);
  F.H0 = build_h_field(p, F.box, 0.0);
  F.gauge = counterexample_gauge_grid(p, opt.xi_half, opt.eta_half);
  const GaugeGrid& G = F.gauge;
  const size_t nx = G.x.size(), ny = G.y.size();

  // C2 is needed where phi > 0; beyond |xi| = xi_half it is below the bump's Fourier tail and set to zero.
  std::vector<size_t> ix, jy;
  RVec xs, ys;
  for (size_t i = 0; i < nx; ++i)
    if (std::abs(G.x[i]) < 0.5 && std::abs(G.x[i]) * p.x_scale() <= opt.xi_half) {
      ix.push_back(i);
      xs.push_back(G.x[i]);
    }
  for (size_t j = 0; j < ny; ++j)
    if (std::abs(G.y[j]) < 0.5) {
      jy.push_back(j);
      ys.push_back(G.y[j]);
    }
  CVec A = h_samples(p, xs, ys, 0.0, HKind::x_antideriv);
  CVec Ay = h_samples(p, xs, ys, 0.0, HKind::x_antideriv_dy);
  F.C2.assign(G.size(), 0.0);
  F.div_C.assign(G.size(), 0.0);
  for (size_t a = 0; a < ix.size(); ++a)
    for (size_t c = 0; c < jy.size(); ++c) {
      const double x = xs[a], y = ys[c];
      const double ph = p.phi(x, y);
      const double phy = p.phi_dy(x, y);
      if (ph == 0 && phy == 0) continue;
      const double g = p.g(y), gy = p.g_dy(y);
      const double av = A[a * ys.size() + c].real(), ayv = Ay[a * ys.size() + c].real();
      const size_t k = G.index(ix[a], jy[c]);
      F.C2[k] = ph * av / g;
      F.div_C[k] = phy * av / g + ph * (ayv / g - av * gy / (g * g));
    }

  auto b = [&p](double y) { return 1.0 / p.g(y); };
  F.psi0.assign(G.size(), 0.0);
  if (opt.solve_gauge) {
    F.psi0 = solve_gauge(G, b, F.div_C, &F.solve, opt.tol, opt.max_iter);
    F.gauge_solved = true;
  }
  F.psi.assign(G.size(), 0.0);
  for (size_t i = 0; i < nx; ++i)
    for (size_t j = 0; j < ny; ++j) {
      size_t k = G.index(i, j);
      F.psi[k] = p.chi(std::hypot(G.x[i], G.y[j])) * F.psi0[k];
    }

  // D(0) = C + eps grad psi with centred differences; rho uses the solver's own operator.
  F.D1.assign(G.size(), 0.0);
  F.D2 = F.C2;
  for (size_t i = 1; i + 1 < nx; ++i)
    for (size_t j = 1; j + 1 < ny; ++j) {
      const size_t k = G.index(i, j);
      const double hxm = G.x[i] - G.x[i - 1], hxp = G.x[i + 1] - G.x[i];
      const double hym = G.y[j] - G.y[j - 1], hyp = G.y[j + 1] - G.y[j];
      auto d = [](double fm, double f0, double fp, double hm, double hp) {
        return (hm * hm * (fp - f0) + hp * hp * (f0 - fm)) / (hm * hp * (hm + hp));
      };
      F.D1[k] = d(F.psi[G.index(i - 1, j)], F.psi[k], F.psi[G.index(i + 1, j)], hxm, hxp);
      F.D2[k] += b(G.y[j]) * d(F.psi[G.index(i, j - 1)], F.psi[k], F.psi[G.index(i, j + 1)], hym, hyp);
    }
  RVec lpsi = apply_gauge_operator(G, b, F.psi);
  F.rho.resize(G.size());
  for (size_t k = 0; k < G.size(); ++k) F.rho[k] = F.div_C[k] + lpsi[k];
  return F;
}

std::array<RVec, 2> d_field(const CounterexampleFields& F, double t) {
  std::array<RVec, 2> D{F.D1, F.D2};
  if (t == 0) return D;
  const GaugeGrid& G = F.gauge;
  CVec ix = h_samples(F.params, G.x, G.y, t, HKind::time_integral_dx);
  CVec iy = h_samples(F.params, G.x, G.y, t, HKind::time_integral_dy);
  for (size_t k = 0; k < G.size(); ++k) {
    D[0][k] += iy[k].real();
    D[1][k] -= ix[k].real();
  }
  return D;
}

// ---------------------------------------------------------------- scan

namespace {

ExponentFit fit_exponent(const RVec& lambdas, const RVec& norms, double log_power, double predicted) {
  ExponentFit f;
  f.predicted = predicted;
  f.log_power = log_power;
  const size_t n = lambdas.size();
  RVec x(n), y(n), ypure(n), lx(n), llx(n), ly(n);
  for (size_t i = 0; i < n; ++i) {
    const double L = std::log(lambdas[i]);
    x[i] = std::log2(lambdas[i]);
    ypure[i] = std::log2(norms[i]);
    y[i] = ypure[i] - log_power * std::log2(L);
    lx[i] = L;
    llx[i] = std::log(L);
    ly[i] = std::log(norms[i]);
  }
  LinearFit lf = linear_fit(x, y);
  f.fitted = lf.slope;
  f.stderr_ = lf.slope_stderr;
  f.pure_power = linear_fit(x, ypure).slope;
  if (n >= 4) {
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd b(n);
    for (size_t i = 0; i < n; ++i) {
      A(i, 0) = lx[i];
      A(i, 1) = llx[i];
      A(i, 2) = 1.0;
      b(i) = ly[i];
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    f.three_a = c(0);
    f.three_b = c(1);
    double ss = (A * c - b).squaredNorm();
    Eigen::Matrix3d cov = (A.transpose() * A).inverse() * (n > 3 ? ss / (n - 3) : 0.0);
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) f.three_cov[r * 3 + k] = cov(r, k);
  }
  return f;
}

nlohmann::json fit_json(const ExponentFit& f) {
  nlohmann::json j = {{"fitted", f.fitted},       {"stderr", f.stderr_},   {"log_power", f.log_power},
                      {"pure_power", f.pure_power}, {"three_param_a", f.three_a}, {"three_param_b", f.three_b},
                      {"three_param_cov", f.three_cov}};
  j["predicted"] = f.has_prediction() ? nlohmann::json(f.predicted) : nlohmann::json(nullptr);
  return j;
}

double inv_exp(double q) { return std::isinf(q) ? 0.0 : 1.0 / q; }

struct LambdaMeasure {
  ScanRow base;
  std::vector<double> h_gamma, d_gamma, rho_norm;
};

LambdaMeasure measure_lambda(double s, double lambda, const RVec& gammas, const StrichartzPair& pair,
                             const ScanOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  CounterexampleParams p = counterexample_params(lambda, s, true);
  CounterexampleFields F = build_counterexample(p, opt.build);
  LambdaMeasure m;
  ScanRow& row = m.base;
  row.lambda = lambda;
  row.lp_lq = h_mixed_norm(p, F.box, F.H0, pair.p, pair.q, opt.time_nodes);
  row.wave_relative = wave_equation_residual(p, F.box, F.H0, true).relative();
  row.wave_relative_smooth = wave_equation_residual(p, F.box, F.H0, false).relative();
  row.mass_outside_2k = mass_outside_box(p, F.box, F.H0, 2.0);
  double divc = gauge_l2(F.gauge, F.div_C);
  row.rho_inner_fraction = divc > 0 ? gauge_l2(F.gauge, F.rho, 0.5) / divc : 0.0;
  row.gauge_iterations = F.solve.iterations;

  CVec hre(F.H0.size());
  for (size_t k = 0; k < hre.size(); ++k) hre[k] = F.H0[k].real();
  GridSpec cg = F.gauge.core_grid();
  CVec d1 = to_complex(F.gauge.core(F.D1)), d2 = to_complex(F.gauge.core(F.D2));
  CVec rc = to_complex(F.gauge.core(F.rho));
  for (double gamma : gammas) {
    spectral::NormSpec hs{spectral::NormSpec::Type::sobolev, gamma};
    m.h_gamma.push_back(spectral::function_space_norm(F.box.grid, hre, hs).value);
    double a = spectral::function_space_norm(cg, d1, hs).value, b = spectral::function_space_norm(cg, d2, hs).value;
    m.d_gamma.push_back(std::hypot(a, b));
    spectral::NormSpec rs{spectral::NormSpec::Type::sobolev, gamma - 0.5 - p.sigma * inv_exp(pair.p)};
    m.rho_norm.push_back(spectral::function_space_norm(cg, rc, rs).value);
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

}  // namespace

bool ScanResult::wave_ok() const {
  for (const auto& r : rows)
    if (!(r.wave_relative <= wave_tol)) return false;
  return !rows.empty();
}

std::vector<ScanResult> sharpness_scan(double s, const RVec& gammas, const StrichartzPair& pair, const RVec& lambdas,
                                       const ScanOptions& opt) {
  if (lambdas.size() < 4) fail("sharpness_scan: need at least 4 lambda values for the exponent fits");
  for (size_t i = 0; i < lambdas.size(); ++i) {
    double e = std::log2(lambdas[i]);
    if (!(lambdas[i] >= 2) || std::abs(e - std::round(e)) > 1e-12) fail("sharpness_scan: lambda values must be powers of 2");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1])) fail("sharpness_scan: lambda values must ascend");
  }
  if (spectral::strichartz_classify(pair.rho, pair.p, pair.q, pair.n) == spectral::PairClass::invalid)
    fail("sharpness_scan: invalid Strichartz pair");
  if (gammas.empty()) fail("sharpness_scan: no gamma values");

  std::vector<LambdaMeasure> meas(lambdas.size());
  unsigned workers = opt.workers > 0 ? opt.workers : std::max(1u, std::thread::hardware_concurrency());
  if (workers <= 1) {
    for (size_t i = 0; i < lambdas.size(); ++i) meas[i] = measure_lambda(s, lambdas[i], gammas, pair, opt);
  } else {
    std::vector<std::future<LambdaMeasure>> jobs;
    size_t next = 0;
    while (next < lambdas.size() || !jobs.empty()) {
      while (next < lambdas.size() && jobs.size() < workers) {
        jobs.push_back(std::async(std::launch::async, measure_lambda, s, lambdas[next], gammas, pair, opt));
        ++next;
      }
      // Collect in order so results stay deterministic.
      size_t done = next - jobs.size();
      meas[done] = jobs.front().get();
      jobs.erase(jobs.begin());
    }
  }

  auto sd = spectral::sigma_delta(s);
  std::vector<ScanResult> out;
  for (size_t gi = 0; gi < gammas.size(); ++gi) {
    const double gamma = gammas[gi];
    ScanResult R;
    R.s = s;
    R.gamma = gamma;
    R.sigma = sd.sigma;
    R.delta = sd.delta;
    R.pair = pair;
    RVec lp, hg, dg, rn, ratio;
    for (size_t i = 0; i < lambdas.size(); ++i) {
      ScanRow row = meas[i].base;
      row.h_gamma = meas[i].h_gamma[gi];
      row.d_gamma = meas[i].d_gamma[gi];
      row.rho_norm = meas[i].rho_norm[gi];
      row.d_over_h = row.d_gamma / row.h_gamma;
      R.rows.push_back(row);
      lp.push_back(row.lp_lq);
      hg.push_back(row.h_gamma);
      dg.push_back(row.d_gamma);
      rn.push_back(row.rho_norm);
      ratio.push_back(row.d_over_h);
    }
    const double iq = inv_exp(pair.q);
    R.lp_lq = fit_exponent(lambdas, lp, -3 * iq, -(1 + sd.delta) * iq);
    R.h_gamma = fit_exponent(lambdas, hg, 2 * gamma - 1.5, gamma - 0.5 * (1 + sd.delta));
    R.d_gamma = fit_exponent(lambdas, dg, 2 * gamma - 1.5, NAN);
    R.rho = fit_exponent(lambdas, rn, 0.0, NAN);
    R.gamma_bound_fitted = R.lp_lq.fitted - R.h_gamma.fitted + gamma;
    R.gamma_bound_predicted = (1 + sd.delta) * (0.5 - iq);
    RVec sorted = ratio;
    std::sort(sorted.begin(), sorted.end());
    double med = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                   : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    for (double r : ratio) R.d_ratio_spread = std::max(R.d_ratio_spread, std::abs(r / med - 1));
    out.push_back(R);
  }
  return out;
}

ScanResult sharpness_scan(double s, double gamma, const StrichartzPair& pair, const RVec& lambdas,
                          const ScanOptions& opt) {
  return sharpness_scan(s, RVec{gamma}, pair, lambdas, opt).front();
}

nlohmann::json ScanResult::to_json() const {
  nlohmann::json j;
  j["s"] = s;
  j["gamma"] = gamma;
  j["sigma"] = sigma;
  j["delta"] = delta;
  j["pair"] = {pair.rho, pair.p, std::isinf(pair.q) ? nlohmann::json("inf") : nlohmann::json(pair.q), pair.n};
  j["fits"] = {{"lp_lq", fit_json(lp_lq)}, {"h_gamma", fit_json(h_gamma)}, {"d_gamma", fit_json(d_gamma)},
               {"rho", fit_json(rho)}};
  j["gamma_lower_bound"] = {{"fitted", gamma_bound_fitted}, {"predicted", gamma_bound_predicted}};
  j["d_ratio_spread"] = d_ratio_spread;
  j["wave_tol"] = wave_tol;
  j["wave_ok"] = wave_ok();
  for (const auto& r : rows)
    j["rows"].push_back({{"lambda", r.lambda},
                         {"lp_lq", r.lp_lq},
                         {"h_gamma", r.h_gamma},
                         {"d_gamma", r.d_gamma},
                         {"rho", r.rho_norm},
                         {"wave_relative", r.wave_relative},
                         {"wave_relative_smooth", r.wave_relative_smooth},
                         {"d_over_h", r.d_over_h},
                         {"mass_outside_2k", r.mass_outside_2k},
                         {"rho_inner_fraction", r.rho_inner_fraction},
                         {"gauge_iterations", r.gauge_iterations},
                         {"seconds", r.seconds}});
  return j;
}

std::string ScanResult::to_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "lambda,lp_lq,h_gamma,d_gamma,rho,wave_relative,wave_relative_smooth,d_over_h,mass_outside_2k,"
        "rho_inner_fraction,gauge_iterations,fit_lp_lq,pred_lp_lq,fit_h_gamma,pred_h_gamma,fit_d_gamma,fit_rho\n";
  for (const auto& r : rows)
    os << r.lambda << ',' << r.lp_lq << ',' << r.h_gamma << ',' << r.d_gamma << ',' << r.rho_norm << ','
       << r.wave_relative << ',' << r.wave_relative_smooth << ',' << r.d_over_h << ',' << r.mass_outside_2k << ','
       << r.rho_inner_fraction << ',' << r.gauge_iterations << ',' << lp_lq.fitted << ',' << lp_lq.predicted << ','
       << h_gamma.fitted << ',' << h_gamma.predicted << ',' << d_gamma.fitted << ',' << rho.fitted << '\n';
  return os.str();
}

}  // namespace m2d
