#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "fbi.hpp"

using namespace m2d;

namespace {

GridSpec line_grid(double L, int N) { return make_grid({L}, {N}, false); }

CVec gaussian(const GridSpec& g, double centre, double width) {
  CVec f(g.size());
  for (int i = 0; i < g.points[0]; ++i) {
    const double y = g.coordinate(0, i) - centre;
    f[i] = std::exp(-y * y / (2 * width * width));
  }
  return f;
}

CVec random_lattice(size_t n, uint64_t seed) {
  Rng rng(seed);
  CVec v(n);
  for (auto& z : v) z = rng.cnormal();
  return v;
}

double rel_diff(const CVec& a, const CVec& b) {
  CVec d(a.size());
  for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return l2norm(d) / l2norm(b);
}

RoughSymbol separable(std::function<cplx(double)> b, std::function<cplx(double)> c, double smoothness = kInf) {
  RoughSymbol a;
  a.terms.push_back({[b](const double* x) { return b(x[0]); }, [c](const double* z) { return c(z[0]); }});
  a.support_radius = kInf;
  a.smoothness = smoothness;
  return a;
}

cplx frequency_cutoff(double z) { return cx::smooth_step(std::abs(z), 0.5, 2.0); }

double remainder_slope(const RoughSymbol& a, int order) {
  RVec lx, ly;
  for (int e = 4; e <= 9; ++e) {
    const double lam = std::ldexp(1.0, e);
    const RemainderProbe p = conjugation_remainder(a, lam, order, 7, 10);
    lx.push_back(e);
    ly.push_back(std::log2(p.norm_estimate));
  }
  return linear_fit(lx, ly).slope;
}

// Smooth cone cutoff in rescaled (time, space) frequency: |xi0| <~ |xi1| ~ 1.
cplx cone_cutoff(const double*, const double* z) {
  const double r = std::abs(z[1]);
  return wide_block(r) * cx::smooth_step(std::abs(z[0]) / std::max(r, 0.125), 1.0, 2.0);
}

}  // namespace

TEST_CASE("zero input maps to zero") {
  const GridSpec g = line_grid(16, 256);
  const CVec f(g.size(), 0.0);
  const FBIRep F = fbi_forward(g, f, 16);
  CHECK(fbi_norm(F) == 0.0);
  const CVec back = fbi_adjoint(FBIRep{F.lattice, CVec(F.lattice.size(), 0.0)}, g);
  CHECK(l2norm(back) == 0.0);
  const auto s = multiplier_sandwich(separable([](double) { return 1.0; }, frequency_cutoff), g, f, 16, 2, 2);
  CHECK(l2norm(s.field) == 0.0);
  CHECK(s.ratio == 0.0);
}

TEST_CASE("isometry on a Gaussian at lambda 16") {
  const GridSpec g = line_grid(16, 256);
  const CVec f = gaussian(g, 8, 1);
  const FBIRep F = fbi_forward(g, f, 16);
  CHECK(std::abs(fbi_norm(F) / sample_norm(g, f) - 1) < 1e-6);
  CHECK(std::abs(fbi_weighted_norm(g, f, 16) / sample_norm(g, f) - 1) < 1e-6);
  CHECK(F.lattice.hxi <= 1 / (4 * std::sqrt(16.0)) + 1e-15);
}

TEST_CASE("isometry on wave packets, m = 1") {
  for (int e = 2; e <= 9; ++e) {
    const double lam = std::ldexp(1.0, e);
    const GridSpec g = fbi_probe_grid(lam, 1);
    const CVec f = wave_packet_input(g, lam, 100 + e);
    const FBIRep F = fbi_forward(g, f, lam);
    CAPTURE(lam);
    CHECK(std::abs(fbi_norm(F) - sample_norm(g, f)) <= 1e-5 * sample_norm(g, f));
  }
}

TEST_CASE("isometry, m = 2, streamed norm") {
  for (double lam : {4.0, 16.0, 64.0}) {
    const GridSpec g = fbi_probe_grid(lam, 2);
    const CVec f = wave_packet_input(g, lam, 11);
    CAPTURE(lam);
    CHECK(std::abs(fbi_weighted_norm(g, f, lam) - sample_norm(g, f)) <= 1e-5 * sample_norm(g, f));
  }
  // The stored lattice and the streamed norm agree where both fit.
  const GridSpec g = make_grid({12, 12}, {48, 48}, false);
  const CVec f = wave_packet_input(g, 4, 12, 12, 0.7);
  const FBIRep F = fbi_forward(g, f, 4);
  CHECK(std::abs(fbi_norm(F) / fbi_weighted_norm(g, f, 4) - 1) < 1e-10);
  CHECK(std::abs(fbi_norm(F) / sample_norm(g, f) - 1) < 1e-5);
}

TEST_CASE("translation covariance at a = 0.5") {
  const GridSpec g = line_grid(16, 256);
  const double lam = 16, a = 0.5;
  const int shift = static_cast<int>(std::lround(a / g.spacing(0)));
  const FBIRep F = fbi_forward(g, gaussian(g, 7.5, 0.5), lam);
  const FBIRep Fs = fbi_forward(g, gaussian(g, 7.5 + a, 0.5), lam);
  const FBILattice& L = F.lattice;
  REQUIRE(std::abs(L.hx - g.spacing(0)) < 1e-15);
  double err = 0, ref = 0;
  for (int j = shift; j < L.nx; ++j)
    for (int l = 0; l < L.nxi; ++l) {
      const cplx want = std::polar(1.0, -lam * L.xi(l) * a) * F.values[static_cast<size_t>(j - shift) * L.nxi + l];
      const cplx got = Fs.values[static_cast<size_t>(j) * L.nxi + l];
      err = std::max(err, std::abs(got - want));
      ref = std::max(ref, std::abs(want));
    }
  CHECK(err < 1e-12 * ref);
}

TEST_CASE("round trip and adjointness") {
  const GridSpec g = line_grid(16, 256);
  const CVec f = gaussian(g, 8, 1);
  const FBIRep F = fbi_forward(g, f, 16);
  CHECK(rel_diff(fbi_adjoint(F, g), f) < 1e-5);

  const double lam = 64;
  const GridSpec gp = fbi_probe_grid(lam, 1);
  const CVec u = wave_packet_input(gp, lam, 3);
  const FBIRep Tu = fbi_forward(gp, u, lam);
  const FBIRep G{Tu.lattice, random_lattice(Tu.lattice.size(), 4)};
  const cplx lhs = fbi_inner(Tu, G), rhs = sample_inner(gp, u, fbi_adjoint(G, gp));
  CHECK(std::abs(lhs - rhs) < 1e-8);
  CHECK(rel_diff(fbi_adjoint(Tu, gp), u) < 1e-5);
}

TEST_CASE("linearity of forward, adjoint and sandwich") {
  const double lam = 32;
  const GridSpec g = fbi_probe_grid(lam, 1);
  const CVec u = wave_packet_input(g, lam, 5), v = wave_packet_input(g, lam, 6);
  const cplx al(0.3, -1.2), be(-0.7, 0.4);
  CVec w(u.size());
  for (size_t i = 0; i < u.size(); ++i) w[i] = al * u[i] + be * v[i];
  auto combine = [&](const CVec& x, const CVec& y) {
    CVec r(x.size());
    for (size_t i = 0; i < x.size(); ++i) r[i] = al * x[i] + be * y[i];
    return r;
  };
  const FBIRep Fu = fbi_forward(g, u, lam), Fv = fbi_forward(g, v, lam), Fw = fbi_forward(g, w, lam);
  CHECK(rel_diff(Fw.values, combine(Fu.values, Fv.values)) < 1e-12);

  const CVec A = random_lattice(Fu.lattice.size(), 8), B = random_lattice(Fu.lattice.size(), 9);
  const CVec adA = fbi_adjoint({Fu.lattice, A}, g), adB = fbi_adjoint({Fu.lattice, B}, g);
  CHECK(rel_diff(fbi_adjoint({Fu.lattice, combine(A, B)}, g), combine(adA, adB)) < 1e-12);

  const RoughSymbol a = separable([](double x) { return 1 + 0.5 * std::sin(2 * x); }, frequency_cutoff);
  const CVec su = multiplier_sandwich(a, g, u, lam, 2, 2).field, sv = multiplier_sandwich(a, g, v, lam, 2, 2).field;
  CHECK(rel_diff(multiplier_sandwich(a, g, w, lam, 2, 2).field, combine(su, sv)) < 1e-12);
}

TEST_CASE("Cauchy-Riemann residual converges at second order") {
  const double lam = 64;
  const GridSpec probe = fbi_probe_grid(lam, 1);
  // Twice as fine as the probe grid so that the x step can be halved.
  const GridSpec g = line_grid(probe.extent[0], 2 * probe.points[0]);
  const CVec f = wave_packet_input(g, lam, 7);
  const FBILattice base = fbi_lattice(probe, lam);
  FBIOptions coarse, fine;
  coarse.x_step = base.hx;
  coarse.xi_step = base.hxi;
  fine.x_step = base.hx / 2;
  fine.xi_step = base.hxi / 2;
  const FBIRep Fc = fbi_forward(g, f, lam, coarse), Ff = fbi_forward(g, f, lam, fine);
  REQUIRE(std::abs(Ff.lattice.hx * 2 - Fc.lattice.hx) < 1e-12);
  const double rc = cauchy_riemann_residual(Fc), rf = cauchy_riemann_residual(Ff);
  CHECK(rc < 0.05);
  CHECK(rc / rf > 3.0);
  CHECK(rc / rf < 5.0);
  CHECK(cauchy_riemann_residual(Ff, 4) < rf);
}

TEST_CASE("constant symbol has no conjugation remainder") {
  RoughSymbol one = separable([](double) { return 1.0; }, [](double) { return 1.0; });
  for (int order : {1, 2}) {
    const RemainderProbe p = conjugation_remainder(one, 64, order, 1, 10);
    CHECK(p.norm_estimate < 1e-8);
    CHECK(p.ratios.size() == 10);
  }
}

TEST_CASE("remainder decays like lambda^(-s/2)") {
  const RoughSymbol freq = separable([](double) { return 1.0; }, frequency_cutoff);
  const RoughSymbol mixed = separable([](double x) { return 1 + 0.5 * std::sin(2 * x); }, frequency_cutoff);
  const double s1 = remainder_slope(freq, 1), s2 = remainder_slope(mixed, 2);
  MESSAGE("order 1 slope " << s1 << ", order 2 slope " << s2);
  CHECK(s1 >= -0.65);
  CHECK(s1 <= -0.35);
  CHECK(std::abs(s1 + 0.5) <= 0.15);
  CHECK(s2 >= -1.2);
  CHECK(s2 <= -0.8);
  CHECK(std::abs(s2 + 1.0) <= 0.15);
}

TEST_CASE("order 2 needs a C^2 symbol") {
  const RoughSymbol rough = separable([](double x) { return std::abs(x); }, frequency_cutoff, 1.0);
  CHECK_THROWS_AS(conjugation_remainder(rough, 16, 2, 1), Error);
  CHECK_NOTHROW(conjugation_remainder(rough, 16, 1, 1, 1));
}

TEST_CASE("input must decay at the box boundary") {
  const GridSpec g = line_grid(16, 256);
  CHECK_THROWS_AS(fbi_forward(g, CVec(g.size(), 1.0), 16), Error);
  CHECK_THROWS_AS(fbi_forward(g, gaussian(g, 8, 1), 2), Error);
}

TEST_CASE("sandwich with a = 1 reconstructs") {
  const RoughSymbol one = separable([](double) { return 1.0; }, [](double) { return 1.0; });
  const GridSpec g = line_grid(16, 256);
  const auto s1 = multiplier_sandwich(one, g, gaussian(g, 8, 1), 16, 2, 2);
  CHECK(std::abs(s1.ratio - 1) < 1e-4);

  RoughSymbol one2;
  one2.eval = [](const double*, const double*) { return cplx(1); };
  one2.support_radius = kInf;
  const GridSpec g2 = make_grid({12, 12}, {48, 48}, false);
  const auto s2 = multiplier_sandwich(one2, g2, wave_packet_input(g2, 4, 2, 12, 0.7), 4, 2, 2);
  CHECK(std::abs(s2.ratio - 1) < 1e-4);
}

TEST_CASE("cone cutoff sandwich is bounded by the derivative constant") {
  RoughSymbol cone;
  cone.eval = cone_cutoff;
  const GridSpec g = make_grid({12, 12}, {48, 48}, false);
  double worst = 0, C = 0;
  for (int t = 0; t < 20; ++t) {
    const auto s = multiplier_sandwich(cone, g, wave_packet_input(g, 4, 1000 + t, 12, 0.7), 4, 4, kInf);
    worst = std::max(worst, s.ratio);
    C = s.constant;
  }
  MESSAGE("worst ratio " << worst << ", constant " << C);
  CHECK(C > 0);
  CHECK(worst <= C);
}

TEST_CASE("snapshot round trip") {
  const GridSpec g = line_grid(16, 256);
  const FBIRep F = fbi_forward(g, gaussian(g, 8, 1), 16);
  const std::string path = "test_fbi_snapshot.bin";
  write_fbi_snapshot(path, F);
  const FBIRep G = read_fbi_snapshot(path);
  std::remove(path.c_str());
  CHECK(G.lattice.same_as(F.lattice));
  CHECK(G.values == F.values);
  CHECK_THROWS_AS(read_fbi_snapshot("missing_snapshot.bin"), Error);
}
