#pragma once

#include <array>
#include <optional>

#include "common.hpp"
#include "fft.hpp"
#include "json.hpp"

namespace m2d {

// Symmetric 2x2 matrix [[a11, a12], [a12, a22]].
struct Sym2 {
  double a11 = 1, a12 = 0, a22 = 1;
  double det() const { return a11 * a22 - a12 * a12; }
  double min_eig() const;
  double max_eig() const;
  Sym2 inverse() const;
  Sym2 adjugate() const { return {a22, -a12, a11}; }
  // v^T A v
  double quad(double v1, double v2) const { return a11 * v1 * v1 + 2 * a12 * v1 * v2 + a22 * v2 * v2; }
};

struct CoefficientSet {
  Sym2 eps_inv, eps, eps_adj;
};
CoefficientSet coefficient_set(const Sym2& eps_inv);

// Interface shared by analytic models and truncated coefficient fields.
class CoefficientField {
 public:
  virtual ~CoefficientField() = default;
  virtual Sym2 eps_inv_at(double x1, double x2) const = 0;
  // Value and first spatial derivatives of the eps^-1 entries.
  virtual void eps_inv_jet(double x1, double x2, Sym2& v, Sym2& d1, Sym2& d2) const = 0;
};

// Real trigonometric series: base + sum_n 2 Re(c_n exp(i 2pi n.x / L)) per entry (11, 12, 22).
struct FourierSeries2 {
  double period = 2 * kPi;
  Sym2 base{1, 0, 1};
  std::vector<std::array<int, 2>> modes;  // half-plane lattice vectors
  std::array<CVec, 3> coef;

  Sym2 value(double x1, double x2) const;
  void jet(double x1, double x2, Sym2& v, Sym2& d1, Sym2& d2) const;
  // Exact samples on a grid whose spatial extents are integer multiples of the period.
  std::array<RVec, 3> on_grid(const GridSpec& g) const;
  double wavenumber(size_t i) const;
};

struct KerrProfile {
  double coeff = 1.0;  // psi(r) = 1 + coeff * r
  double psi(double r) const { return 1.0 + coeff * r; }
  double dpsi(double) const { return coeff; }
};

enum class ModelKind { constant, synthetic_cs, kerr, counterexample };
std::string to_string(ModelKind k);

// Profiles for the sharp counterexample family.
namespace cx {
// C-infinity step: 1 for r <= r0, 0 for r >= r1.
double smooth_step(double r, double r0, double r1);
double smooth_step_deriv(double r, double r0, double r1);
// a(r) = r^2 on [0,1], supported in [0,2).
double plateau_square(double r);
double plateau_square_deriv(double r);
// g(y) = 1 + lambda^{2 sigma} y^2 or its C^s-bounded version.
double g_quadratic(double y, double lambda, double sigma);
double g_smooth(double y, double lambda, double sigma, double delta);
double g_quadratic_deriv(double y, double lambda, double sigma);
double g_smooth_deriv(double y, double lambda, double sigma, double delta);
}  // namespace cx

class Permittivity : public CoefficientField {
 public:
  static Permittivity constant(const Sym2& eps_inv);
  // Random Fourier series with |c_n| ~ |n|^{-(s+1.51)}; period L; lattice radius max_mode.
  static Permittivity synthetic(double s, uint64_t seed, double amplitude, double period = 2 * kPi,
                                int max_mode = 48);
  static Permittivity kerr(const KerrProfile& p);
  static Permittivity counterexample(double lambda, double s, bool smooth = true);

  static Permittivity from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  ModelKind kind() const { return kind_; }
  bool needs_state() const { return kind_ == ModelKind::kerr; }
  // Sampling box (x1_lo, x1_hi, x2_lo, x2_hi) for probes.
  std::array<double, 4> box() const;
  double period() const { return series_.period; }
  const FourierSeries2* series() const;
  const KerrProfile& kerr_profile() const { return kerr_; }
  double amplitude() const { return amplitude_; }
  double smoothness() const { return s_; }

  CoefficientSet eval(double x1, double x2) const;
  CoefficientSet eval_state(double u1, double u2) const;
  // Constant model obtained by freezing a Kerr law at a state.
  Permittivity frozen(double u1, double u2) const;

  Sym2 eps_inv_at(double x1, double x2) const override;
  void eps_inv_jet(double x1, double x2, Sym2& v, Sym2& d1, Sym2& d2) const override;

 private:
  ModelKind kind_ = ModelKind::constant;
  FourierSeries2 series_;  // constant and synthetic models
  KerrProfile kerr_;
  double s_ = 0, amplitude_ = 0, lambda_ = 0;
  uint64_t seed_ = 0;
  int max_mode_ = 0;
  bool smooth_ = true;
};

struct EllipticityReport {
  double lambda1 = 0, lambda2 = 0;
  std::array<double, 2> argmin{}, argmax{};
  int samples = 0;
};
EllipticityReport ellipticity_probe(const Permittivity& model, int sample_count, uint64_t seed);

struct SymbolPack {
  std::array<std::array<cplx, 3>, 3> p{}, d{}, m{}, m_inv{};
  cplx q;
  double weighted_norm = 0;
  std::array<double, 2> xi_star{};
};
// xi = (xi0, xi1, xi2); throws if |xi'| < 1e-6.
SymbolPack assemble_symbols(const Sym2& eps_inv, const double* xi);
SymbolPack assemble_symbols(const CoefficientField& c, const double* x, const double* xi);

using Mat3 = std::array<std::array<cplx, 3>, 3>;
Mat3 matmul(const Mat3& a, const Mat3& b);
double frobenius(const Mat3& a);
double diagonalization_residual(const SymbolPack& s);  // ||m d m^-1 - p||_F

// Smoothly frequency-truncated coefficients eps^{<=nu} on a spatial grid.
class TruncatedCoefficient : public CoefficientField {
 public:
  TruncatedCoefficient(GridSpec grid, FourierSeries2 series, double nu, double lambda1_before, double lambda1_after);

  const GridSpec& grid() const { return grid_; }
  const FourierSeries2& series() const { return series_; }
  double cutoff() const { return nu_; }
  double lambda1_before() const { return l1_before_; }
  double lambda1_after() const { return l1_after_; }
  // Entries 11, 12, 22 of the truncated eps^-1 on the grid.
  const std::array<RVec, 3>& samples() const { return samples_; }

  Sym2 eps_inv_at(double x1, double x2) const override { return series_.value(x1, x2); }
  void eps_inv_jet(double x1, double x2, Sym2& v, Sym2& d1, Sym2& d2) const override {
    series_.jet(x1, x2, v, d1, d2);
  }

 private:
  GridSpec grid_;
  FourierSeries2 series_;
  double nu_, l1_before_, l1_after_;
  std::array<RVec, 3> samples_;
};

// The spatial axes of a (possibly space-time) grid.
GridSpec spatial_grid(const GridSpec& g);

TruncatedCoefficient truncate_coefficient(const Permittivity& model, const GridSpec& grid, double nu);

struct PhasePoint {
  std::array<double, 3> x, xi;
};
struct FlowTrajectory {
  std::vector<PhasePoint> points;
  bool exited_box = false;
};
struct FlowOptions {
  double t_final = 1.0;
  int steps = 1000;
  std::optional<std::array<double, 4>> box;  // spatial box; none means unbounded
};
// Bicharacteristics of q = xi0 - ||xi'||_adj with classic RK4.
FlowTrajectory hamilton_flow(const CoefficientField& c, const PhasePoint& start, const FlowOptions& opt);
double half_wave_symbol(const CoefficientField& c, const PhasePoint& p);

// Kerr system matrices A^1, A^2 and the symmetrizer C at a state.
std::array<std::array<double, 3>, 3> kerr_system_matrix(const KerrProfile& k, int j, double u1, double u2);
std::array<std::array<double, 3>, 3> kerr_symmetrizer(const KerrProfile& k, double u1, double u2);

}  // namespace m2d
