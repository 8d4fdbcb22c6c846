#pragma once

#include <functional>
#include <optional>

#include "material.hpp"
#include "spectral.hpp"

namespace m2d {

using ComplexField = std::array<CVec, 3>;
ComplexField to_complex(const SpectralField& f);
double l2norm(const ComplexField& f);

// Symbol a(x, zeta) in rescaled frequency zeta = xi / lambda_scale.
struct RoughSymbol {
  std::function<cplx(const double* x, const double* zeta)> eval;
  // Optional separable form sum_r b_r(x) c_r(zeta); used instead of eval when present.
  struct Term {
    std::function<cplx(const double* x)> b;
    std::function<cplx(const double* zeta)> c;
  };
  std::vector<Term> terms;
  double support_radius = 2.0;  // infinity for symbols without compact xi-support
  double smoothness = kInf;
};

struct QuantizeOptions {
  double tol = 1e-10;
  int budget = 0;  // 0 means 33^dim
};

struct QuantizeResult {
  CVec field;
  int modes_used = 0;
  double tail = 0;          // sum of sup|a_k| over dropped modes, relative to the full sum
  double series_bound = 0;  // sum_k sup_x |a_k(x)|, an L2 operator bound
  bool exact_lattice = false;
};

// a(x, D) f via the Fourier series of a in zeta over [-pi, pi]^dim: sum_k a_k(x) f(x + k / lambda).
QuantizeResult quantize(const RoughSymbol& a, const GridSpec& g, const CVec& f, double lambda_scale,
                        const QuantizeOptions& opt = {});
ComplexField quantize(const RoughSymbol& a, const SpectralField& f, double lambda_scale,
                      const QuantizeOptions& opt = {});

// Entries (11, 12, 22) of eps^-1 on the spatial part of g, optionally truncated at sqrt(lambda).
std::array<RVec, 3> sample_coefficients(const Permittivity& model, const GridSpec& g,
                                        std::optional<double> truncation_lambda);

enum class PForm { divergence, nondivergence };
SpectralField apply_maxwell_P(const SpectralField& u, const Permittivity& model,
                              std::optional<double> truncation_lambda = {}, PForm form = PForm::divergence);

// Fattened block cutoff: 1 on [1/2, 2], supported in [1/4, 4].
double wide_block(double r);

// Kohn-Nirenberg operators with symbols ||xi'||_A^{+-1} * wide_block(|xi'| / lambda) for a coefficient field A,
// expanded in angular harmonics of xi'. Acts on spatial fields.
class WeightedNormOp {
 public:
  // A given by entries (11, 12, 22) on the spatial grid g.
  WeightedNormOp(const GridSpec& g, const std::array<RVec, 3>& A, double lambda, double tol = 1e-12);
  CVec apply(const CVec& f, int power) const;
  CVec apply_adjoint(const CVec& f, int power) const;
  int harmonics() const { return static_cast<int>(coef_[0].size()); }
  const GridSpec& grid() const { return g_; }

 private:
  GridSpec g_;
  size_t ns_ = 0;
  std::array<std::vector<CVec>, 2> coef_;  // per power (+1, -1), per harmonic, spatial values
  std::array<std::vector<CVec>, 2> sym_;   // per power, per harmonic, Fourier symbol
};

enum class DiagOp { N, D, M, P };

// Operators N, D, M of the pseudo-differential diagonalization and P, with coefficients truncated at sqrt(lambda).
// Coefficients do not depend on time, so every operator acts on one time frequency xi0 at a time.
class Diagonalizer {
 public:
  Diagonalizer(const Permittivity& model, const GridSpec& g, double lambda, double tol = 1e-12);
  Diagonalizer(const std::array<RVec, 3>& eps_inv, const GridSpec& g, double lambda, double tol = 1e-12);

  // Space-time fields on g.
  ComplexField apply(DiagOp which, const ComplexField& u) const;
  ComplexField apply_adjoint(DiagOp which, const ComplexField& u) const;
  ComplexField compose_MDN(const ComplexField& u) const;

  // Spatial fields at time frequency xi0.
  ComplexField apply_slice(DiagOp which, const ComplexField& u, double xi0) const;
  ComplexField apply_slice_adjoint(DiagOp which, const ComplexField& u, double xi0) const;

  const WeightedNormOp& weighted_norm() const { return dn_; }
  const std::array<RVec, 3>& coefficients() const { return e_; }
  const GridSpec& grid() const { return g_; }
  const GridSpec& spatial() const { return sg_; }

 private:
  GridSpec g_, sg_;
  std::array<RVec, 3> e_;
  WeightedNormOp dn_;

  template <class F>
  ComplexField per_slice(const ComplexField& u, F&& f) const;
};

ComplexField apply_diagonalizer(DiagOp which, const ComplexField& u, const GridSpec& g, const Permittivity& model,
                                double lambda);

struct OperatorProbe {
  double lambda = 0, mu = 0;
  int trials = 0;
  double norm_estimate = 0;
  RVec quotients;            // per-trial final ||A x|| / ||x||
  std::vector<int> steps;    // power-iteration steps per trial
  double last_rel_change = 0;
  std::string model;
  uint64_t seed = 0;
};

// Power iteration on A^* A with independent seeded restarts.
struct PowerOptions {
  int min_steps = 15;
  int max_steps = 200;
  double rel_tol = 1e-3;
};
using FieldMap = std::function<ComplexField(const ComplexField&)>;
OperatorProbe power_iteration(const FieldMap& A, const FieldMap& A_adj, size_t field_size, int trials, uint64_t seed,
                              const PowerOptions& opt = {});

// Grid used by the probes at frequency lambda: one coefficient period, resolving 2 lambda + 5 sqrt(lambda).
// The time axis has frequency spacing lambda.
GridSpec probe_grid(const Permittivity& model, double lambda, bool with_time);

OperatorProbe mdn_residual_probe(const Permittivity& model, double lambda, int trials, uint64_t seed);
OperatorProbe frequency_leakage_probe(const Permittivity& model, double mu, double lambda, uint64_t seed,
                                      int trials = 5);

}  // namespace m2d
