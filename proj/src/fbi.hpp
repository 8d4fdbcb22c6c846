#pragma once

#include <string>

#include "pdo.hpp"

namespace m2d {

// Phase-space lattice: x in [x_lo, x_lo + (nx-1) hx]^m, xi in [xi_lo, xi_lo + (nxi-1) hxi]^m.
struct FBILattice {
  double lambda = 0;
  int m = 1;
  double x_lo = 0, hx = 0;
  int nx = 0;
  double xi_lo = -4, hxi = 0;
  int nxi = 0;

  size_t size() const;
  double x(int j) const { return x_lo + j * hx; }
  double xi(int l) const { return xi_lo + l * hxi; }
  double cell() const;  // (hx * hxi)^m
  // hx in units of 2 pi / (lambda * (xi_hi - xi_lo)).
  double oversampling() const;
  bool same_as(const FBILattice& o) const;
};

// values = Phi^{1/2} e^{-i lambda xi.x} T_lambda f on the lattice, so the L2_Phi norm is the plain lattice norm.
// Layout: m = 1 -> [x][xi]; m = 2 -> [x1][x2][xi1][xi2].
struct FBIRep {
  FBILattice lattice;
  CVec values;
};

struct FBIOptions {
  double x_step = 0;   // 0: 1/(8 sqrt(lambda)) for m = 1, 1/(2 sqrt(lambda)) for m = 2
  double xi_step = 0;  // 0: 1/(4 sqrt(lambda))
  double x_pad = 5;    // x-box padding in units of lambda^{-1/2}
  size_t max_entries = size_t(1) << 25;
};

// f sampled on g (m = g.ndim() spatial axes, equal extents and point counts); the grid box is the support box.
FBIRep fbi_forward(const GridSpec& g, const CVec& f, double lambda, const FBIOptions& opt = {});
// L2_Phi adjoint, returned on the sample grid g.
CVec fbi_adjoint(const FBIRep& F, const GridSpec& g, const FBIOptions& opt = {});
FBILattice fbi_lattice(const GridSpec& g, double lambda, const FBIOptions& opt = {});

double fbi_norm(const FBIRep& F);
cplx fbi_inner(const FBIRep& a, const FBIRep& b);
double sample_norm(const GridSpec& g, const CVec& f);
cplx sample_inner(const GridSpec& g, const CVec& a, const CVec& b);

// ||T_lambda f||_{L2_Phi} without storing the lattice: xi on the lattice, x integrated exactly over the padded box.
double fbi_weighted_norm(const GridSpec& g, const CVec& f, double lambda, const FBIOptions& opt = {});

// Relative discrete Cauchy-Riemann residual of T_lambda f (m = 1), centered differences of the given order.
double cauchy_riemann_residual(const FBIRep& F, int order = 2);

GridSpec fbi_probe_grid(double lambda, int m);
// Gaussian packets near the box centre with frequencies |k| <= 1.5 lambda; width 0 means 2/sqrt(lambda).
CVec wave_packet_input(const GridSpec& g, double lambda, uint64_t seed, int packets = 12, double width = 0);

struct RemainderProbe {
  double lambda = 0;
  int order = 1;
  int inputs = 0;
  double norm_estimate = 0;      // max ||R f||_{L2_Phi} / ||f||
  double weighted_estimate = 0;  // max ||(d_xi - lambda xi) R f||_{L2_Phi} / ||f||, reported only
  RVec ratios;
  uint64_t seed = 0;
};

// R = T A_lambda - a~ T with a~ = a (order 1) or a + (2/lambda)(dbar a)(d - i lambda xi) (order 2); m = 1.
// x in the symbol is measured from the centre of the probe box.
RemainderProbe conjugation_remainder(const RoughSymbol& a, double lambda, int order, uint64_t seed, int inputs = 10);

struct SandwichResult {
  CVec field;
  double ratio = 0;  // ||out||_{L^p L^q} / ||f||_{L^p L^q}
  double constant = 0;
};

SandwichResult multiplier_sandwich(const RoughSymbol& a, const GridSpec& g, const CVec& f, double lambda, double p,
                                   double q, const FBIOptions& opt = {});
// sup_x sum_{|alpha| <= m+1} ||D_xi^alpha a(x, .)||_{L1}, sampled on the lattice x points.
double multiplier_constant(const RoughSymbol& a, const FBILattice& lat);

void write_fbi_snapshot(const std::string& path, const FBIRep& F);
FBIRep read_fbi_snapshot(const std::string& path);

}  // namespace m2d
