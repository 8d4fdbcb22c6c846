#include "spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace m2d {

SpectralField::SpectralField(const GridSpec& g) : grid_(g) {
  for (auto& c : comp_) c.assign(g.size(), 0.0);
}

SpectralField::SpectralField(const GridSpec& g, std::array<RVec, 3> c) : grid_(g), comp_(std::move(c)) {
  for (const auto& v : comp_)
    if (v.size() != g.size()) fail("SpectralField: component size does not match grid");
  for (const auto& v : comp_)
    for (double x : v)
      if (!std::isfinite(x)) fail("SpectralField: non-finite component value");
}

RVec& SpectralField::operator[](int i) {
  if (std::atomic_load(&cache_)) fail("SpectralField: components are frozen once the Fourier cache exists");
  return comp_[i];
}

const std::array<CVec, 3>& SpectralField::fourier() const {
  auto c = std::atomic_load(&cache_);
  if (!c) {
    auto fresh = std::make_shared<std::array<CVec, 3>>();
    for (int i = 0; i < 3; ++i) (*fresh)[i] = fft(grid_, to_complex(comp_[i]));
    std::shared_ptr<const std::array<CVec, 3>> expected;
    std::shared_ptr<const std::array<CVec, 3>> desired = fresh;
    std::atomic_compare_exchange_strong(&cache_, &expected, desired);
    c = std::atomic_load(&cache_);
  }
  return *c;
}

namespace spectral {

double chi(double r) {
  double u = std::clamp(r - 1.0, 0.0, 1.0);
  if (u >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

double bump(double r) { return chi(r) - chi(2.0 * r); }

double low_bump(double r) { return chi(2.0 * r); }

void for_each_mode(const GridSpec& g, const std::function<void(size_t, const double*, bool)>& f) {
  const int nd = g.ndim();
  std::vector<std::vector<double>> ks(nd);
  std::vector<std::vector<char>> nyq(nd);
  for (int a = 0; a < nd; ++a) {
    ks[a].resize(g.points[a]);
    nyq[a].resize(g.points[a]);
    for (int i = 0; i < g.points[a]; ++i) {
      ks[a][i] = g.wavenumber(a, i);
      nyq[a][i] = g.is_nyquist(a, i);
    }
  }
  double k[3] = {0, 0, 0};
  size_t idx = 0;
  if (nd == 1) {
    for (int i = 0; i < g.points[0]; ++i) {
      k[0] = ks[0][i];
      f(idx++, k, nyq[0][i]);
    }
  } else if (nd == 2) {
    for (int i = 0; i < g.points[0]; ++i)
      for (int j = 0; j < g.points[1]; ++j) {
        k[0] = ks[0][i];
        k[1] = ks[1][j];
        f(idx++, k, nyq[0][i] || nyq[1][j]);
      }
  } else {
    for (int i = 0; i < g.points[0]; ++i)
      for (int j = 0; j < g.points[1]; ++j)
        for (int l = 0; l < g.points[2]; ++l) {
          k[0] = ks[0][i];
          k[1] = ks[1][j];
          k[2] = ks[2][l];
          f(idx++, k, nyq[0][i] || nyq[1][j] || nyq[2][l]);
        }
  }
}

void apply_symbol(const GridSpec& g, CVec& hat, const std::function<cplx(const double*)>& m) {
  if (hat.size() != g.size()) fail("apply_symbol: size mismatch");
  for_each_mode(g, [&](size_t i, const double* k, bool nyq) { hat[i] = nyq ? cplx(0) : hat[i] * m(k); });
}

CVec multiplier(const GridSpec& g, const CVec& f, const std::function<cplx(const double*)>& m) {
  CVec h = fft(g, f);
  apply_symbol(g, h, m);
  fft_inverse(g, h);
  return h;
}

double spatial_norm(const GridSpec& g, const double* k) {
  double s = 0;
  for (int a = g.first_spatial(); a < g.ndim(); ++a) s += k[a] * k[a];
  return std::sqrt(s);
}

double full_norm(const GridSpec& g, const double* k) {
  double s = 0;
  for (int a = 0; a < g.ndim(); ++a) s += k[a] * k[a];
  return std::sqrt(s);
}

static double kind_norm(const GridSpec& g, const double* k, BlockKind kind) {
  return kind == BlockKind::spacetime ? full_norm(g, k) : spatial_norm(g, k);
}

BlockRange resolved_blocks(const GridSpec& g, BlockKind kind) {
  double kmax = 0, kmin = kInf;
  for_each_mode(g, [&](size_t, const double* k, bool nyq) {
    if (nyq) return;
    double r = kind_norm(g, k, kind);
    kmax = std::max(kmax, r);
    if (r > 0) kmin = std::min(kmin, r);
  });
  BlockRange br;
  br.k_min = kmin;
  br.k_max = kmax;
  br.j_hi = static_cast<int>(std::ceil(std::log2(kmax) - 1e-12));
  br.j_lo = static_cast<int>(std::floor(std::log2(kmin) + 1e-12));
  return br;
}

double block_symbol(const GridSpec& g, const double* k, double lambda, BlockKind kind) {
  double v = bump(kind_norm(g, k, kind) / lambda);
  if (kind == BlockKind::cone && g.includes_time) v *= chi(std::abs(k[0]) / lambda);
  return v;
}

CVec project_block(const GridSpec& g, const CVec& f, double lambda, BlockKind kind) {
  if (!(lambda > 0)) fail("project_block: lambda must be positive");
  return multiplier(g, f, [&](const double* k) { return cplx(block_symbol(g, k, lambda, kind)); });
}

CVec project_low(const GridSpec& g, const CVec& f, BlockKind kind) {
  return multiplier(g, f, [&](const double* k) { return cplx(low_bump(kind_norm(g, k, kind))); });
}

CVec project_dyadic(const GridSpec& g, const CVec& f, int j, BlockKind kind) {
  if (j < -1) fail("project_dyadic: block index must be >= -1");
  if (j == -1) return project_low(g, f, kind);
  BlockRange br = resolved_blocks(g, kind);
  if (j > br.j_hi) fail("project_dyadic: block 2^" + std::to_string(j) + " lies above the grid band");
  return project_block(g, f, std::ldexp(1.0, j), kind);
}

SpectralField project_dyadic(const SpectralField& f, int j, BlockKind kind) {
  std::array<RVec, 3> out;
  for (int c = 0; c < 3; ++c) out[c] = real_part(project_dyadic(f.grid(), to_complex(f[c]), j, kind));
  return SpectralField(f.grid(), out);
}

CVec remove_nyquist(const GridSpec& g, const CVec& f) {
  return multiplier(g, f, [](const double*) { return cplx(1.0); });
}

FracResult fractional_derivative(const GridSpec& g, const CVec& f, double alpha, DerivKind kind) {
  FracResult r;
  r.zero_mode_removed = alpha < 0 && kind != DerivKind::bracket;
  r.field = multiplier(g, f, [&](const double* k) {
    if (kind == DerivKind::bracket) {
      double s = spatial_norm(g, k);
      return cplx(std::pow(1.0 + s * s, alpha / 2.0));
    }
    double n = kind == DerivKind::full ? full_norm(g, k) : spatial_norm(g, k);
    if (n == 0) return cplx(alpha == 0 ? 1.0 : 0.0);
    return cplx(std::pow(n, alpha));
  });
  return r;
}

SpectralField fractional_derivative(const SpectralField& f, double alpha, DerivKind kind) {
  std::array<RVec, 3> out;
  for (int c = 0; c < 3; ++c) out[c] = real_part(fractional_derivative(f.grid(), to_complex(f[c]), alpha, kind).field);
  return SpectralField(f.grid(), out);
}

CVec partial(const GridSpec& g, const CVec& f, int axis) {
  return multiplier(g, f, [axis](const double* k) { return cplx(0, k[axis]); });
}

double lq_norm(const GridSpec& g, const CVec& f, double q) {
  if (std::isinf(q)) {
    double m = 0;
    for (const auto& z : f) m = std::max(m, std::abs(z));
    return m;
  }
  double s = 0;
  for (const auto& z : f) s += std::pow(std::abs(z), q);
  return std::pow(s * g.cell_volume(), 1.0 / q);
}

double mixed_norm(const GridSpec& g, const CVec& f, double p, double q, double t0, double t1) {
  if (f.size() != g.size()) fail("mixed_norm: size mismatch");
  if (p < 1 || q < 1) fail("mixed_norm: exponents must be >= 1");
  if (!g.includes_time) return lq_norm(g, f, q);
  const double L = g.extent[0];
  if (!(t0 >= -1e-12 && t1 <= L + 1e-12 && t0 < t1)) fail("mixed_norm: time window outside the grid");
  const size_t ns = g.spatial_size();
  const double dv = g.spatial_cell_volume();
  const double dt = g.dt_implied();
  double outer = 0;
  for (int i = 0; i < g.points[0]; ++i) {
    double t = i * dt;
    if (t < t0 - 1e-12 || t >= t1 - 1e-12) continue;
    const cplx* row = f.data() + i * ns;
    double inner = 0;
    if (std::isinf(q)) {
      for (size_t j = 0; j < ns; ++j) inner = std::max(inner, std::abs(row[j]));
    } else {
      for (size_t j = 0; j < ns; ++j) inner += std::pow(std::abs(row[j]), q);
      inner = std::pow(inner * dv, 1.0 / q);
    }
    if (std::isinf(p))
      outer = std::max(outer, inner);
    else
      outer += std::pow(inner, p) * dt;
  }
  return std::isinf(p) ? outer : std::pow(outer, 1.0 / p);
}

double mixed_norm(const GridSpec& g, const CVec& f, double p, double q) {
  return mixed_norm(g, f, p, q, 0.0, g.includes_time ? g.extent[0] : 1.0);
}

NormResult function_space_norm(const GridSpec& g, const CVec& f, const NormSpec& spec) {
  NormResult res;
  using T = NormSpec::Type;
  if (spec.type == T::sobolev) {
    res.value = lq_norm(g, fractional_derivative(g, f, spec.s, DerivKind::bracket).field, 2.0);
    return res;
  }
  if (spec.type == T::sobolev_homogeneous) {
    res.value = lq_norm(g, fractional_derivative(g, f, spec.s, DerivKind::full).field, 2.0);
    return res;
  }
  BlockRange br = resolved_blocks(g, BlockKind::spacetime);
  res.j_lo = br.j_lo;
  res.j_hi = br.j_hi;
  double acc = 0;
  for (int j = br.j_lo; j <= br.j_hi; ++j) {
    double lam = std::ldexp(1.0, j);
    CVec b = project_block(g, f, lam, BlockKind::spacetime);
    double term;
    if (spec.type == T::besov)
      term = std::pow(lam, spec.s) * mixed_norm(g, b, spec.p, spec.q);
    else
      term = std::pow(lam, spec.s) * mixed_norm(g, b, 1.0, kInf);
    if (spec.type == T::xs || std::isinf(spec.r))
      acc = std::max(acc, term);
    else
      acc += std::pow(term, spec.r);
  }
  res.value = (spec.type == T::xs || std::isinf(spec.r)) ? acc : std::pow(acc, 1.0 / spec.r);
  return res;
}

static double inv(double p) { return std::isinf(p) ? 0.0 : 1.0 / p; }

PairClass strichartz_classify(double rho, double p, double q, int n) {
  const double tol = 1e-12;
  if (n < 2 || !(p >= 2) || !(q >= 2)) return PairClass::invalid;
  if (p == 2 && std::isinf(q) && n == 3) return PairClass::invalid;
  double expected = n * (0.5 - inv(q)) - inv(p);
  if (std::abs(rho - expected) > tol) return PairClass::invalid;
  double lhs = 2.0 * inv(p) + (n - 1) * inv(q);
  double rhs = (n - 1) / 2.0;
  if (lhs > rhs + tol) return PairClass::invalid;
  return std::abs(lhs - rhs) <= tol ? PairClass::sharp : PairClass::nonsharp;
}

std::string to_string(PairClass c) {
  switch (c) {
    case PairClass::sharp:
      return "sharp";
    case PairClass::nonsharp:
      return "nonsharp";
    default:
      return "invalid";
  }
}

SigmaDelta sigma_delta(double s) {
  if (!(s >= 0 && s <= 2)) fail("sigma_delta: s must lie in [0,2]");
  return {(2.0 - s) / (2.0 + s), 2.0 / (2.0 + s)};
}

}  // namespace spectral
}  // namespace m2d
