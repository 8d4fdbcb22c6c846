#pragma once

#include <array>
#include <functional>
#include <memory>

#include "common.hpp"
#include "fft.hpp"

namespace m2d {

// Three real components (D1, D2, H) on a grid, with a lazily filled Fourier cache.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(const GridSpec& g);
  SpectralField(const GridSpec& g, std::array<RVec, 3> c);

  const GridSpec& grid() const { return grid_; }
  RVec& operator[](int i);
  const RVec& operator[](int i) const { return comp_[i]; }
  const std::array<RVec, 3>& components() const { return comp_; }
  // Forward transforms of the components; computed once per instance.
  const std::array<CVec, 3>& fourier() const;
  bool has_fourier_cache() const { return static_cast<bool>(std::atomic_load(&cache_)); }

 private:
  GridSpec grid_;
  std::array<RVec, 3> comp_;
  mutable std::shared_ptr<const std::array<CVec, 3>> cache_;
};

namespace spectral {

// Profile equal to 1 on [0,1], 0 beyond 2.
double chi(double r);
// Dyadic annulus bump, supported in [1/2, 2].
double bump(double r);
// Low-frequency piece S0, supported in [0, 1].
double low_bump(double r);

enum class BlockKind { spacetime, spatial, cone };
enum class DerivKind { full, spatial, bracket };

// Visit every Fourier mode: f(index, wavenumber vector, touches_nyquist).
void for_each_mode(const GridSpec& g, const std::function<void(size_t, const double*, bool)>& f);

// Multiply the Fourier data in place; Nyquist modes are zeroed.
void apply_symbol(const GridSpec& g, CVec& hat, const std::function<cplx(const double*)>& m);
CVec multiplier(const GridSpec& g, const CVec& f, const std::function<cplx(const double*)>& m);

double spatial_norm(const GridSpec& g, const double* k);
double full_norm(const GridSpec& g, const double* k);

struct BlockRange {
  int j_lo = 0;   // lowest dyadic block with a nonzero lattice mode
  int j_hi = 0;   // smallest j with 2^j covering the largest resolved wavenumber
  double k_min = 0, k_max = 0;
};
BlockRange resolved_blocks(const GridSpec& g, BlockKind kind);

// Projection onto |xi| ~ lambda (any positive lambda); j = -1 in project_dyadic is the low block.
CVec project_block(const GridSpec& g, const CVec& f, double lambda, BlockKind kind);
CVec project_low(const GridSpec& g, const CVec& f, BlockKind kind);
CVec project_dyadic(const GridSpec& g, const CVec& f, int j, BlockKind kind);
SpectralField project_dyadic(const SpectralField& f, int j, BlockKind kind);
double block_symbol(const GridSpec& g, const double* k, double lambda, BlockKind kind);

// Drops every mode touching a Nyquist index; this is the resolved band.
CVec remove_nyquist(const GridSpec& g, const CVec& f);

struct FracResult {
  CVec field;
  bool zero_mode_removed = false;
};
FracResult fractional_derivative(const GridSpec& g, const CVec& f, double alpha, DerivKind kind);
SpectralField fractional_derivative(const SpectralField& f, double alpha, DerivKind kind);

// Spectral partial derivative along an axis.
CVec partial(const GridSpec& g, const CVec& f, int axis);

// L^p_t L^q_x with Riemann sums; q or p infinite means grid max. Time window [t0, t1).
double mixed_norm(const GridSpec& g, const CVec& f, double p, double q, double t0, double t1);
double mixed_norm(const GridSpec& g, const CVec& f, double p, double q);
double lq_norm(const GridSpec& g, const CVec& f, double q);

struct NormSpec {
  enum class Type { sobolev, sobolev_homogeneous, besov, xs } type = Type::sobolev;
  double s = 0, p = 2, q = 2, r = 2;
};
struct NormResult {
  double value = 0;
  int j_lo = 0, j_hi = 0;  // blocks entering a dyadic sum
};
NormResult function_space_norm(const GridSpec& g, const CVec& f, const NormSpec& spec);

enum class PairClass { sharp, nonsharp, invalid };
PairClass strichartz_classify(double rho, double p, double q, int n);
std::string to_string(PairClass c);

struct SigmaDelta {
  double sigma, delta;
};
SigmaDelta sigma_delta(double s);

}  // namespace spectral
}  // namespace m2d
