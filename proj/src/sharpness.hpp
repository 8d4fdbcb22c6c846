#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "fft.hpp"
#include "json.hpp"
#include "material.hpp"

namespace m2d {

// Parameters of the counterexample family at frequency lambda and coefficient smoothness s.
struct CounterexampleParams {
  double lambda = 16, s = 2;
  double sigma = 0, delta = 0.5;
  bool smooth_g = true;  // false: the pure quadratic g
  int min_r_nodes = 64;

  double log_lambda() const;
  // Normalized bump on [1, 2] with unit integral.
  double beta(double r) const;
  // Cutoff for C2: 1 on |z| <= 1/4, 0 beyond 1/2.
  double phi(double x, double y) const;
  double phi_dy(double x, double y) const;
  // Radial cutoff for the gauge potential: 1 on [0, 1/2], 0 beyond 3/4.
  double chi(double r) const;
  double a(double r) const;
  double g(double y) const;
  double g_dy(double y) const;
  double g_quadratic(double y) const;
  // (L^2 lambda, L lambda^delta) with L = log lambda: the x and y scales of H.
  double x_scale() const;
  double y_scale() const;
  nlohmann::json to_json() const;
};
CounterexampleParams counterexample_params(double lambda, double s, bool smooth_g = true);

// Quadrature of the r-integral: H = sum_k w_k u_{r_k}, r_k in [L^2, 2 L^2], w_k including beta and 1/L^2.
struct RQuadrature {
  RVec r, w;
};
// Enough Gauss-Legendre nodes for |x - t| <= x_reach.
RQuadrature r_quadrature(const CounterexampleParams& p, double x_reach);

// Periodic box for H in coordinates x = x0 + i dx, y = y0 + j dy.
struct FieldBox {
  GridSpec grid;
  double x0 = 0, y0 = 0;
  // Exact scaled spacings when the box is centred (x0 = -N dx / 2); 0 otherwise.
  double xi_step = 0, eta_step = 0;
  RVec xs() const;
  RVec ys() const;
};
// Box [-xi_half, xi_half) x [-eta_half, eta_half) in the scaled variables (L^2 lambda x, L lambda^delta y)
// at the finest admissible resolution.
FieldBox field_box(const CounterexampleParams& p, double xi_half = 512, double eta_half = 8);
// Throws with the required spacings when dx or dy is too coarse.
void check_resolution(const CounterexampleParams& p, double dx, double dy);

enum class HKind {
  value,         // H
  dt,            // d_t H
  dtt,           // d_t^2 H
  x_antideriv,   // int_{-inf}^x d_t H(t, x', y) dx'
  x_antideriv_dy,
  time_integral_dx,  // int_0^t d_x H ds
  time_integral_dy,
};
// Complex samples on the tensor grid xs x ys (row-major, y fastest) at time t.
CVec h_samples(const CounterexampleParams& p, const RVec& xs, const RVec& ys, double t, HKind kind = HKind::value);
// Complex H on the box at time t; the physical field is its real part.
CVec build_h_field(const CounterexampleParams& p, const FieldBox& box, double t = 0);

// Tensor grid on [-1, 1]^2: uniform core around the origin, geometrically graded outside.
struct GaugeGrid {
  RVec x, y;
  int core_x0 = 0, core_nx = 0, core_y0 = 0, core_ny = 0;
  size_t size() const { return x.size() * y.size(); }
  size_t index(size_t i, size_t j) const { return i * y.size() + j; }
  bool interior(size_t i, size_t j) const;  // inside the open unit disk and off the square boundary
  GridSpec core_grid() const;
  RVec core(const RVec& f) const;
};
GaugeGrid uniform_gauge_grid(int n_half);
GaugeGrid graded_gauge_grid(double hx, double hy, double x_core, double y_core, double growth = 1.15);
GaugeGrid counterexample_gauge_grid(const CounterexampleParams& p, double xi_half = 512, double eta_half = 8);

struct GaugeSolveReport {
  int iterations = 0;
  RVec residual_history;  // relative residual per iteration
  double relative_residual = 0;
  size_t unknowns = 0;
};
// Solves (d1^2 + d2 b(y) d2) psi = -f in the unit disk, psi = 0 outside, with the symmetric five-point
// divergence-form scheme and x-line preconditioned conjugate gradients.
RVec solve_gauge(const GaugeGrid& grid, const std::function<double(double)>& b, const RVec& f,
                 GaugeSolveReport* report = nullptr, double tol = 1e-10, int max_iter = 20000);
// The discrete operator (d1^2 + d2 b d2) psi at interior nodes; 0 elsewhere.
RVec apply_gauge_operator(const GaugeGrid& grid, const std::function<double(double)>& b, const RVec& psi);
// Discrete Dirichlet form sum over faces of the flux coefficients times squared differences.
double gauge_dirichlet_form(const GaugeGrid& grid, const std::function<double(double)>& b, const RVec& psi);
// Sum of cell area * f * g over interior nodes.
double gauge_inner(const GaugeGrid& grid, const RVec& f, const RVec& g);
double gauge_l2(const GaugeGrid& grid, const RVec& f, double radius = kInf);

struct CounterexampleFields {
  CounterexampleParams params;
  FieldBox box;
  CVec H0;  // complex H(0) on the box
  GaugeGrid gauge;
  RVec C2, div_C, psi0, psi, D1, D2, rho;  // on the gauge grid, D at t = 0
  GaugeSolveReport solve;
  bool gauge_solved = false;
};
struct BuildOptions {
  bool solve_gauge = true;  // false forces psi = 0
  double field_xi_half = 1536;           // H box; wide enough for spectral second derivatives
  double xi_half = 512, eta_half = 8;    // uniform core of the gauge grid
  double tol = 1e-10;
  int max_iter = 20000;
};
CounterexampleFields build_counterexample(const CounterexampleParams& p, const BuildOptions& opt = {});
// D(t) on the gauge grid: D(0) plus the time integral of grad_perp Re H.
std::array<RVec, 2> d_field(const CounterexampleFields& f, double t);

// Fraction of the squared mass of H0 outside c K (|xi| <= c, |eta| <= c in scaled variables).
double mass_outside_box(const CounterexampleParams& p, const FieldBox& box, const CVec& h, double c);
// Half-width in x of the smallest symmetric strip holding the given fraction of the mass.
double mass_half_width(const FieldBox& box, const CVec& h, double fraction = 0.99);

struct WaveResidual {
  double residual = 0;  // ||d_t^2 H + lambda^{2 sigma}/4 H - (g d1^2 + d2^2) H||_2
  double scale = 0;     // lambda^{2 sigma} ||H||_2
  double relative() const { return scale > 0 ? residual / scale : 0.0; }
};
// At t = 0 on the box with spectral space derivatives; quadratic selects g_quadratic instead of p.g.
WaveResidual wave_equation_residual(const CounterexampleParams& p, const FieldBox& box, const CVec& h,
                                    bool quadratic = true);

struct StrichartzPair {
  double rho = 0.75, p = 4, q = kInf;
  int n = 2;
};

struct ExponentFit {
  double fitted = 0, predicted = NAN, stderr_ = 0;  // slope in log2 lambda after dividing the log power
  double log_power = 0;
  double pure_power = 0;            // slope without log division
  double three_a = 0, three_b = 0;  // log N = a log lambda + b log log lambda + c
  std::array<double, 9> three_cov{};
  bool has_prediction() const { return !std::isnan(predicted); }
  bool within(double tol) const { return !has_prediction() || std::abs(fitted - predicted) <= tol; }
};

struct ScanRow {
  double lambda = 0;
  double lp_lq = 0, h_gamma = 0, d_gamma = 0, rho_norm = 0;
  double wave_relative = 0, wave_relative_smooth = 0;
  double d_over_h = 0;
  double mass_outside_2k = 0;
  double rho_inner_fraction = 0;  // ||rho||_{L2(B(0,1/2))} / ||div C||_2
  int gauge_iterations = 0;
  double seconds = 0;
};

struct ScanResult {
  double s = 0, gamma = 0, sigma = 0, delta = 0;
  StrichartzPair pair;
  std::vector<ScanRow> rows;
  ExponentFit lp_lq, h_gamma, d_gamma, rho;
  double gamma_bound_fitted = 0, gamma_bound_predicted = 0;
  double wave_tol = 1e-4;
  // Ratios ||D(0)||_{H^gamma} / ||H(0)||_{H^gamma}: max over lambda of |ratio / median - 1|.
  double d_ratio_spread = 0;
  bool wave_ok() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct ScanOptions {
  BuildOptions build;
  int time_nodes = 16;
  int workers = 0;  // 0: hardware concurrency
};
ScanResult sharpness_scan(double s, double gamma, const StrichartzPair& pair, const RVec& lambdas,
                          const ScanOptions& opt = {});
// Several gamma values sharing one build per lambda.
std::vector<ScanResult> sharpness_scan(double s, const RVec& gammas, const StrichartzPair& pair, const RVec& lambdas,
                                       const ScanOptions& opt = {});

// ||Re H||_{L^p_t L^q_x} over t in [0, 1], using H(t, x + t, y) = e^{i lambda^sigma t / 2} H(0, x, y).
double h_mixed_norm(const CounterexampleParams& p, const FieldBox& box, const CVec& h0, double pexp, double qexp,
                    int time_nodes = 16);

}  // namespace m2d
