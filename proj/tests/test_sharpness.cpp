#include <cmath>

#include "doctest.h"
#include "sharpness.hpp"
#include "spectral.hpp"

using namespace m2d;

namespace {

// Composite Simpson rule on [a, b] with n (even) panels.
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4 : 2) * f(a + k * h);
  return s * h / 3;
}

double raw_bump(double r) {
  double u = 2 * r - 3;
  return std::abs(u) < 1 ? std::exp(-1 / (1 - u * u)) : 0.0;
}

RVec linspace(double a, double b, int n) {
  RVec v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

double max_abs(const CVec& v) {
  double m = 0;
  for (auto z : v) m = std::max(m, std::abs(z));
  return m;
}

}  // namespace

TEST_CASE("counterexample parameters and profiles") {
  auto p = counterexample_params(64, 1);
  CHECK(p.sigma == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(p.delta == doctest::Approx(2.0 / 3).epsilon(1e-14));
  CHECK_THROWS_AS(counterexample_params(1.5, 2), Error);
  CHECK_THROWS_AS(counterexample_params(16, 0.5), Error);

  // Unit mass by an independent rule; support in [1, 2], nonnegative.
  double mass = simpson([&](double r) { return p.beta(r); }, 1, 2, 4000);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  for (double r : linspace(0, 3, 601)) {
    CHECK(p.beta(r) >= 0);
    if (r <= 1 || r >= 2) CHECK(p.beta(r) == 0);
  }
  CHECK(p.beta(1.5) / raw_bump(1.5) == doctest::Approx(1 / simpson(raw_bump, 1, 2, 4000)).epsilon(1e-12));

  for (double r : linspace(0, 1, 257)) {
    CHECK(p.a(r) == r * r);
    if (r <= 0.5) CHECK(p.chi(r) == 1.0);
    if (r <= 0.25) CHECK(p.phi(r, 0) == 1.0);
  }
  for (double r : linspace(2, 3, 65)) CHECK(p.a(r) == 0.0);
  for (double r : linspace(0.75, 2, 65)) CHECK(p.chi(r) == 0.0);
  for (double r : linspace(0.5, 2, 65)) CHECK(p.phi(0.6 * r, 0.8 * r) == 0.0);
  // g equals the quadratic profile where the plateau of a applies.
  for (double y : linspace(-1, 1, 201))
    if (std::abs(y) * std::pow(p.lambda, p.delta) <= 1) CHECK(p.g(y) == doctest::Approx(p.g_quadratic(y)).epsilon(1e-14));
}

TEST_CASE("H at the origin and its Gaussian profile in y") {
  for (double lam : {16.0, 256.0}) {
    auto p = counterexample_params(lam, 2);
    CVec h0 = h_samples(p, {0.0}, {0.0}, 0.0);
    CHECK(std::abs(h0[0] - 1.0) < 1e-10);
    // Pointwise value at |y| = 3 lambda^-delta / log lambda against the r'-integral of beta e^{-9 r'/2}.
    const double y3 = 3 / p.y_scale();
    double oracle = simpson([&](double r) { return p.beta(r) * std::exp(-4.5 * r); }, 1, 2, 4000);
    CVec h3 = h_samples(p, {0.0}, {y3, -y3}, 0.0);
    CHECK(std::abs(h3[0].real() - oracle) < 1e-12);
    CHECK(std::abs(h3[1] - h3[0]) < 1e-15);
    // About 1.2e-3 of the peak there; the profile falls below 1e-4 of the peak by |y| = 5 lambda^-delta / log lambda.
    CHECK(oracle > 1e-3);
    CHECK(std::abs(h_samples(p, {0.0}, {5 / p.y_scale()}, 0.0)[0]) < 1e-4);
  }
}

TEST_CASE("H is self-similar and its x support shrinks like 1 / (lambda log^2 lambda)") {
  // Same scaled box at two lambda values: identical samples.
  auto p1 = counterexample_params(32, 1.5), p2 = counterexample_params(128, 1.5);
  auto b1 = field_box(p1, 128, 8), b2 = field_box(p2, 128, 8);
  CVec h1 = build_h_field(p1, b1), h2 = build_h_field(p2, b2);
  double diff = 0;
  for (size_t k = 0; k < h1.size(); ++k) diff = std::max(diff, std::abs(h1[k] - h2[k]));
  CHECK(diff < 1e-12);
  CHECK(mass_outside_box(p1, b1, h1, 2) == doctest::Approx(mass_outside_box(p2, b2, h2, 2)).epsilon(1e-12));

  // Both lambda values on one physical grid fine enough for the larger: 99%-mass widths.
  auto pa = counterexample_params(64, 2), pb = counterexample_params(128, 2);
  FieldBox box;
  const double dx = 0.25 / pb.x_scale(), dy = 0.125 / pb.y_scale();
  const int nx = 2 * static_cast<int>(std::ceil(120 / pa.x_scale() / dx)), ny = 2 * static_cast<int>(std::ceil(8 / pa.y_scale() / dy));
  box.grid = make_grid({nx * dx, ny * dy}, {nx, ny}, false);
  box.x0 = -0.5 * nx * dx;
  box.y0 = -0.5 * ny * dy;
  double wa = mass_half_width(box, build_h_field(pa, box), 0.99);
  double wb = mass_half_width(box, build_h_field(pb, box), 0.99);
  double predicted = pa.x_scale() / pb.x_scale();
  MESSAGE("99% half-widths " << wa << " " << wb << " ratio " << wb / wa << " predicted " << predicted);
  CHECK(wb / wa == doctest::Approx(predicted).epsilon(0.02));
  CHECK(wb / wa < 0.5);
}

TEST_CASE("mass of H outside multiples of the support box") {
  auto p = counterexample_params(64, 2);
  auto b = field_box(p, 1536, 8);
  CVec h = build_h_field(p, b);
  double prev = 1;
  for (double c : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
    double m = mass_outside_box(p, b, h, c);
    CHECK(m < prev);
    prev = m;
  }
  double m2 = mass_outside_box(p, b, h, 2);
  MESSAGE("mass outside 2K: " << m2);
  CHECK(m2 > 0.5);
  CHECK(mass_outside_box(p, b, h, 128) < 1e-6);
}

TEST_CASE("resolution rule is enforced") {
  auto p = counterexample_params(64, 2);
  FieldBox b = field_box(p, 64, 8);
  b.grid = make_grid({b.grid.extent[0], b.grid.extent[1]}, {b.grid.points[0] / 2, b.grid.points[1]}, false);
  b.xi_step = 0;
  try {
    build_h_field(p, b);
    FAIL("expected an under-resolution error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("need <=") != std::string::npos);
  }
}

TEST_CASE("H solves the wave equation with the -lambda^{2 sigma}/4 term") {
  for (double s : {1.0, 2.0})
    for (double lam : {16.0, 64.0}) {
      auto p = counterexample_params(lam, s);
      auto b = field_box(p, 1536, 8);
      CVec h = build_h_field(p, b);
      auto w = wave_equation_residual(p, b, h, true);
      MESSAGE("s=" << s << " lambda=" << lam << " residual " << w.relative());
      CHECK(w.relative() <= 1e-4);
    }
  // The identity is for the quadratic g; the bounded g departs from it where the Gaussian still carries mass.
  auto p = counterexample_params(16, 1);
  auto b = field_box(p, 1536, 8);
  CVec h = build_h_field(p, b);
  CHECK(wave_equation_residual(p, b, h, false).relative() > 1e-3);
}

TEST_CASE("time translation: H(t, x + t, y) = e^{i lambda^sigma t / 2} H(0, x, y)") {
  auto p = counterexample_params(32, 1);
  RVec xs = linspace(-40 / p.x_scale(), 40 / p.x_scale(), 161), ys = linspace(-6 / p.y_scale(), 6 / p.y_scale(), 25);
  const double t = 0.3;
  RVec xt = xs;
  for (auto& x : xt) x += t;
  CVec a = h_samples(p, xt, ys, t), b = h_samples(p, xs, ys, 0.0);
  const cplx ph = std::polar(1.0, 0.5 * std::pow(p.lambda, p.sigma) * t);
  double err = 0;
  for (size_t k = 0; k < a.size(); ++k) err = std::max(err, std::abs(a[k] - ph * b[k]));
  CHECK(err < 1e-9);
}

TEST_CASE("closed-form x antiderivative agrees with cumulative quadrature") {
  auto p = counterexample_params(32, 2);
  const double x_lo = -400 / p.x_scale(), x_hi = 60 / p.x_scale();
  const int n = 200001;
  RVec xs = linspace(x_lo, x_hi, n), ys = {0.0, 1.5 / p.y_scale()};
  CVec dt = h_samples(p, xs, ys, 0.0, HKind::dt);
  CVec A = h_samples(p, xs, ys, 0.0, HKind::x_antideriv);
  const double h = xs[1] - xs[0];
  double peak = max_abs(A);
  for (size_t j = 0; j < ys.size(); ++j) {
    cplx acc = 0;  // the tail left of x_lo is below the bump's Fourier decay
    double err = 0;
    for (int i = 1; i < n; ++i) {
      acc += 0.5 * h * (dt[(i - 1) * 2 + j] + dt[i * 2 + j]);
      err = std::max(err, std::abs(acc - A[i * 2 + j]));
    }
    CHECK(err < 1e-5 * peak);
  }
  // The y derivative of the antiderivative against a centred difference.
  const double y = 1.5 / p.y_scale(), dy = 1e-5 / p.y_scale();
  RVec xs3 = {0.0, 3 / p.x_scale()};
  CVec ap = h_samples(p, xs3, {y + dy}, 0.0, HKind::x_antideriv), am = h_samples(p, xs3, {y - dy}, 0.0, HKind::x_antideriv);
  CVec ay = h_samples(p, xs3, {y}, 0.0, HKind::x_antideriv_dy);
  for (int i = 0; i < 2; ++i) CHECK(std::abs((ap[i] - am[i]) / (2 * dy) - ay[i]) < 1e-6 * std::abs(ay[i]) + 1e-9);
}

TEST_CASE("time integrals of grad H against Gauss-Legendre in time") {
  auto p = counterexample_params(16, 1.5);
  const double t = 0.05;
  RVec xs = linspace(-20 / p.x_scale(), 0.05 + 20 / p.x_scale(), 41), ys = {0.0, 0.7 / p.y_scale()};
  CVec ix = h_samples(p, xs, ys, t, HKind::time_integral_dx);
  CVec iy = h_samples(p, xs, ys, t, HKind::time_integral_dy);
  RVec sn, sw;
  gauss_legendre(64, 0.0, t, sn, sw);
  const double hs = 0.5 * std::pow(p.lambda, p.sigma), dy = 1e-5 / p.y_scale();
  CVec ox(ix.size(), 0.0), oy(iy.size(), 0.0);
  for (size_t m = 0; m < sn.size(); ++m) {
    // d_x H = -d_t H + (i/2) lambda^sigma H for this family.
    CVec v = h_samples(p, xs, ys, sn[m]), d = h_samples(p, xs, ys, sn[m], HKind::dt);
    for (size_t k = 0; k < v.size(); ++k) ox[k] += sw[m] * (-d[k] + cplx(0, hs) * v[k]);
    RVec yp = ys, ym = ys;
    for (auto& y : yp) y += dy;
    for (auto& y : ym) y -= dy;
    CVec vp = h_samples(p, xs, yp, sn[m]), vm = h_samples(p, xs, ym, sn[m]);
    for (size_t k = 0; k < v.size(); ++k) oy[k] += sw[m] * (vp[k] - vm[k]) / (2 * dy);
  }
  double ex = 0, ey = 0;
  for (size_t k = 0; k < ix.size(); ++k) {
    ex = std::max(ex, std::abs(ix[k] - ox[k]));
    ey = std::max(ey, std::abs(iy[k] - oy[k]));
  }
  CHECK(ex < 1e-8 * max_abs(ox));
  CHECK(ey < 1e-6 * max_abs(oy) + 1e-12);
}

TEST_CASE("graded gauge grid layout") {
  GaugeGrid g = graded_gauge_grid(1e-3, 4e-3, 0.05, 0.1);
  for (const RVec* ax : {&g.x, &g.y}) {
    CHECK(ax->front() == -1.0);
    CHECK(ax->back() == 1.0);
    for (size_t i = 1; i < ax->size(); ++i) CHECK((*ax)[i] > (*ax)[i - 1]);
  }
  CHECK(g.core_nx % 2 == 0);
  CHECK(g.core_nx == 100);
  CHECK(g.core_ny == 50);
  for (int i = 1; i < g.core_nx; ++i)
    CHECK(g.x[g.core_x0 + i] - g.x[g.core_x0 + i - 1] == doctest::Approx(1e-3).epsilon(1e-9));
  GridSpec cg = g.core_grid();
  CHECK(cg.spacing(0) == doctest::Approx(1e-3).epsilon(1e-9));
  CHECK(cg.spacing(1) == doctest::Approx(4e-3).epsilon(1e-9));
  CHECK_THROWS_AS(graded_gauge_grid(0.3, 0.1, 1.0, 0.5), Error);
}

TEST_CASE("gauge solve: zero forcing, manufactured solution, variational identity") {
  auto one = [](double) { return 1.0; };
  {
    GaugeGrid g = uniform_gauge_grid(16);
    GaugeSolveReport rep;
    RVec psi = solve_gauge(g, one, RVec(g.size(), 0.0), &rep);
    CHECK(rep.iterations == 0);
    for (double v : psi) CHECK(v == 0.0);
  }
  // psi* = (1 - r^2)^2 with -Laplace psi* = 8 - 16 r^2.
  RVec hs, errs;
  for (int n : {16, 32, 64, 128}) {
    GaugeGrid g = uniform_gauge_grid(n);
    RVec f(g.size(), 0.0);
    for (size_t i = 0; i < g.x.size(); ++i)
      for (size_t j = 0; j < g.y.size(); ++j) f[g.index(i, j)] = 8 - 16 * (g.x[i] * g.x[i] + g.y[j] * g.y[j]);
    GaugeSolveReport rep;
    RVec psi = solve_gauge(g, one, f, &rep);
    CHECK(rep.relative_residual < 1e-10);
    RVec e(g.size(), 0.0);
    for (size_t i = 0; i < g.x.size(); ++i)
      for (size_t j = 0; j < g.y.size(); ++j) {
        double r2 = g.x[i] * g.x[i] + g.y[j] * g.y[j];
        double exact = r2 < 1 ? (1 - r2) * (1 - r2) : 0.0;
        e[g.index(i, j)] = psi[g.index(i, j)] - exact;
      }
    // L2 error; the staircase disk boundary makes the pointwise maximum erratic in h.
    double err = gauge_l2(g, e);
    hs.push_back(std::log2(1.0 / n));
    errs.push_back(std::log2(err));
    MESSAGE("n=" << n << " L2 error " << err << " iterations " << rep.iterations);
  }
  double slope = linear_fit(hs, errs).slope;
  MESSAGE("manufactured-solution slope " << slope);
  CHECK(std::abs(slope - 2) <= 0.2);

  // Variable coefficient on a graded grid: sum of fluxes equals <f, psi>.
  GaugeGrid g = graded_gauge_grid(0.01, 0.02, 0.3, 0.4, 1.2);
  auto b = [](double y) { return 1.0 / (1 + 4 * y * y); };
  RVec f(g.size(), 0.0);
  for (size_t i = 0; i < g.x.size(); ++i)
    for (size_t j = 0; j < g.y.size(); ++j) f[g.index(i, j)] = std::cos(7 * g.x[i]) * std::exp(-9 * g.y[j] * g.y[j]) + g.x[i] * g.y[j];
  RVec psi = solve_gauge(g, b, f);
  double form = gauge_dirichlet_form(g, b, psi), work = gauge_inner(g, f, psi);
  CHECK(form > 0);
  CHECK(std::abs(form - work) <= 1e-9 * std::abs(work));
  // The discrete operator reproduces the forcing in the interior.
  RVec lp = apply_gauge_operator(g, b, psi);
  double worst = 0, scale = 0;
  for (size_t i = 0; i < g.x.size(); ++i)
    for (size_t j = 0; j < g.y.size(); ++j)
      if (g.interior(i, j)) {
        worst = std::max(worst, std::abs(lp[g.index(i, j)] + f[g.index(i, j)]));
        scale = std::max(scale, std::abs(f[g.index(i, j)]));
      }
  CHECK(worst < 1e-7 * scale);
}

TEST_CASE("gauge solve reports non-convergence with its residual history") {
  GaugeGrid g = uniform_gauge_grid(32);
  RVec f(g.size(), 1.0);
  try {
    solve_gauge(g, [](double) { return 1.0; }, f, nullptr, 1e-10, 3);
    FAIL("expected a convergence failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
    CHECK(std::string(e.what()).find("history") != std::string::npos);
  }
}

TEST_CASE("counterexample fields: support of C, charge, forced zero gauge") {
  auto p = counterexample_params(16, 2);
  CounterexampleFields F = build_counterexample(p);
  const GaugeGrid& G = F.gauge;
  for (size_t i = 0; i < G.x.size(); ++i)
    for (size_t j = 0; j < G.y.size(); ++j) {
      double r = std::hypot(G.x[i], G.y[j]);
      size_t k = G.index(i, j);
      if (r >= 0.5) CHECK(F.C2[k] == 0.0);
      if (r >= 0.75) CHECK(F.psi[k] == 0.0);
    }
  CHECK(F.gauge_solved);
  CHECK(F.solve.relative_residual < 1e-10);
  const double divc = gauge_l2(G, F.div_C);
  CHECK(divc > 0);
  double inner = gauge_l2(G, F.rho, 0.5);
  RVec outer = F.rho;
  for (size_t i = 0; i < G.x.size(); ++i)
    for (size_t j = 0; j < G.y.size(); ++j)
      if (std::hypot(G.x[i], G.y[j]) < 0.75) outer[G.index(i, j)] = 0;
  MESSAGE("rho in B(1/2): " << inner / divc << ", outside B(3/4): " << gauge_l2(G, outer) / divc
                            << ", total: " << gauge_l2(G, F.rho) / divc << " (relative to ||div C||)");
  CHECK(inner <= 1e-6 * divc);
  CHECK(gauge_l2(G, outer) <= 1e-6 * divc);

  // D(0) is comparable to H(0) in H^1.
  CVec hre(F.H0.size());
  for (size_t k = 0; k < hre.size(); ++k) hre[k] = F.H0[k].real();
  spectral::NormSpec h1{spectral::NormSpec::Type::sobolev, 1.0};
  double nh = spectral::function_space_norm(F.box.grid, hre, h1).value;
  double nd = std::hypot(spectral::function_space_norm(G.core_grid(), to_complex(G.core(F.D1)), h1).value,
                         spectral::function_space_norm(G.core_grid(), to_complex(G.core(F.D2)), h1).value);
  CHECK(nd / nh > 0.5);
  CHECK(nd / nh < 2.0);

  BuildOptions off;
  off.solve_gauge = false;
  CounterexampleFields Z = build_counterexample(p, off);
  CHECK_FALSE(Z.gauge_solved);
  for (size_t k = 0; k < Z.rho.size(); ++k) {
    CHECK(Z.psi[k] == 0.0);
    CHECK(Z.rho[k] == Z.div_C[k]);
  }
}

TEST_CASE("d_t D equals grad_perp Re H") {
  auto p = counterexample_params(8, 2);
  BuildOptions opt;
  opt.field_xi_half = 64;
  CounterexampleFields F = build_counterexample(p, opt);
  const double t = 0.2, dt = 2e-5;
  auto Dp = d_field(F, t + dt), Dm = d_field(F, t - dt);
  const GaugeGrid& G = F.gauge;
  RVec xs, ys;
  std::vector<size_t> ii, jj;
  for (size_t i = 1; i + 1 < G.x.size(); i += 7)
    if (std::abs(G.x[i] - t) < 0.3) {
      xs.push_back(G.x[i]);
      ii.push_back(i);
    }
  for (size_t j = 1; j + 1 < G.y.size(); j += 5) {
    ys.push_back(G.y[j]);
    jj.push_back(j);
  }
  const double ex = 1e-6;
  RVec xp = xs, xm = xs, yp = ys, ym = ys;
  for (auto& v : xp) v += ex;
  for (auto& v : xm) v -= ex;
  for (auto& v : yp) v += ex;
  for (auto& v : ym) v -= ex;
  CVec hxp = h_samples(p, xp, ys, t), hxm = h_samples(p, xm, ys, t);
  CVec hyp = h_samples(p, xs, yp, t), hym = h_samples(p, xs, ym, t);
  double err = 0, scale = 0;
  for (size_t a = 0; a < ii.size(); ++a)
    for (size_t c = 0; c < jj.size(); ++c) {
      size_t k = G.index(ii[a], jj[c]), q = a * ys.size() + c;
      double d1 = (Dp[0][k] - Dm[0][k]) / (2 * dt), d2 = (Dp[1][k] - Dm[1][k]) / (2 * dt);
      double hy = (hyp[q] - hym[q]).real() / (2 * ex), hx = (hxp[q] - hxm[q]).real() / (2 * ex);
      err = std::max({err, std::abs(d1 - hy), std::abs(d2 + hx)});
      scale = std::max({scale, std::abs(hy), std::abs(hx)});
    }
  CHECK(scale > 0);
  CHECK(err < 1e-5 * scale);
}

TEST_CASE("degenerate lambda = 2 builds finite fields") {
  auto p = counterexample_params(2, 1);
  BuildOptions opt;
  opt.field_xi_half = 64;
  CounterexampleFields F = build_counterexample(p, opt);
  for (auto z : F.H0) CHECK(std::isfinite(std::abs(z)));
  for (const RVec* f : {&F.C2, &F.div_C, &F.psi, &F.D1, &F.D2, &F.rho})
    for (double v : *f) CHECK(std::isfinite(v));
}

TEST_CASE("sharpness scan: argument checks and exponent fits") {
  StrichartzPair pair;
  CHECK_THROWS_AS(sharpness_scan(2, 0.75, pair, {16, 32, 64}), Error);
  CHECK_THROWS_AS(sharpness_scan(2, 0.75, pair, {16, 32, 48, 64}), Error);
  CHECK_THROWS_AS(sharpness_scan(2, 0.75, pair, {64, 32, 16, 8}), Error);
  CHECK_THROWS_AS(sharpness_scan(2, 0.75, StrichartzPair{0, 2, kInf, 3}, {16, 32, 64, 128}), Error);

  ScanOptions opt;
  opt.build.field_xi_half = 512;
  opt.build.xi_half = 256;
  auto res = sharpness_scan(1.0, RVec{1.0}, pair, {16, 32, 64, 128}, opt);
  const ScanResult& r = res.front();
  MESSAGE("H^1 exponent " << r.h_gamma.fitted << " (predicted " << r.h_gamma.predicted << "), LpLq exponent "
                          << r.lp_lq.fitted << ", gamma bound " << r.gamma_bound_fitted);
  CHECK(r.h_gamma.predicted == doctest::Approx(1.0 - 5.0 / 6).epsilon(1e-12));
  CHECK(r.h_gamma.within(0.05));
  CHECK(r.lp_lq.predicted == 0.0);
  CHECK(r.lp_lq.within(0.05));
  CHECK(r.gamma_bound_predicted == doctest::Approx(0.75 + (1.0 / 3) / 4).epsilon(1e-12));
  CHECK(std::abs(r.gamma_bound_fitted - r.gamma_bound_predicted) < 0.05);
  CHECK(r.d_ratio_spread < 0.5);
  CHECK(r.rows.size() == 4);
  CHECK(r.to_json()["rows"].size() == 4);
  const std::string csv = r.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
