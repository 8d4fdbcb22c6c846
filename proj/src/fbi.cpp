#include "fbi.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace m2d {

namespace {

// C_1 = 2^{-1/2} pi^{-3/4}; C_m = C_1^m.
const double kC1 = 1.0 / (std::sqrt(2.0) * std::pow(kPi, 0.75));
// Gaussian tail e^{-lambda r^2 / 2} < 1e-16 beyond r = kTail / sqrt(lambda).
const double kTail = std::sqrt(2.0 * std::log(1e16));

// One axis of the tensor-product transform. Samples sit at internal indices P .. P+N-1 of a zero-padded
// periodic grid of Np points; lattice x points are every s-th internal point.
struct Axis {
  double lambda = 0, h = 0, scale = 0;
  int N = 0, Np = 0, P = 0, s = 1;
  int nx = 0, nxi = 0;
  double x_lo = 0, hx = 0, hxi = 0;
  std::vector<int> q;
  RVec xs, xis;
  RVec gtab;  // nxi x Np, Fourier transform of the modulated Gaussian

  Axis(double L, int n, double lam, int m, const FBIOptions& opt) : lambda(lam), N(n) {
    h = L / N;
    const double rl = 1.0 / std::sqrt(lam);
    const double pad = opt.x_pad * rl;
    P = static_cast<int>(std::ceil((pad + kTail * rl) / h)) + 1;
    Np = fft_size_at_least(N + 2.0 * P);
    const double xstep = opt.x_step > 0 ? opt.x_step : (m == 1 ? 0.125 : 0.5) * rl;
    s = std::max(1, static_cast<int>(std::floor(xstep / h + 1e-9)));
    hx = s * h;
    const int jlo = static_cast<int>(std::ceil(pad / hx - 1e-9));
    x_lo = -jlo * hx;
    nx = static_cast<int>(std::floor((L - h + pad - x_lo) / hx + 1e-9)) + 1;
    for (int j = 0; j < nx; ++j) {
      q.push_back(P - jlo * s + j * s);
      xs.push_back(x_lo + j * hx);
    }
    if (q.front() < 0 || q.back() >= Np) fail("fbi: lattice does not fit the padded grid");
    const double xistep = opt.xi_step > 0 ? opt.xi_step : 0.25 * rl;
    const int nint = static_cast<int>(std::ceil(8.0 / xistep - 1e-9));
    hxi = 8.0 / nint;
    nxi = nint + 1;
    for (int l = 0; l < nxi; ++l) xis.push_back(-4.0 + l * hxi);
    scale = kC1 * std::pow(lam, 0.75);
    gtab.resize(static_cast<size_t>(nxi) * Np);
    const double Lp = Np * h, g0 = std::sqrt(2 * kPi / lam);
    for (int l = 0; l < nxi; ++l)
      for (int i = 0; i < Np; ++i) {
        const int mi = i < Np / 2 ? i : i - Np;
        const double w = 2 * kPi * mi / Lp - lam * xis[l];
        gtab[static_cast<size_t>(l) * Np + i] = g0 * std::exp(-w * w / (2 * lam));
      }
  }

  size_t line() const { return static_cast<size_t>(nx) * nxi; }

  // in: N samples at stride; out: nx * nxi values [x][xi].
  void forward(const cplx* in, size_t stride, cplx* out) const {
    CVec buf(Np, 0.0);
    for (int n = 0; n < N; ++n) buf[P + n] = in[n * stride];
    fft_rows(buf, 1, Np, -1);
    CVec blk(static_cast<size_t>(nxi) * Np);
    for (int l = 0; l < nxi; ++l) {
      const double* gt = &gtab[static_cast<size_t>(l) * Np];
      cplx* b = &blk[static_cast<size_t>(l) * Np];
      for (int i = 0; i < Np; ++i) b[i] = gt[i] * buf[i];
    }
    fft_rows(blk, nxi, Np, 1);
    const double c = scale / Np;
    for (int j = 0; j < nx; ++j)
      for (int l = 0; l < nxi; ++l)
        out[static_cast<size_t>(j) * nxi + l] =
            c * std::polar(1.0, -lambda * xis[l] * xs[j]) * blk[static_cast<size_t>(l) * Np + q[j]];
  }

  // in: nx * nxi values [x][xi]; out: N samples at stride.
  void adjoint(const cplx* in, cplx* out, size_t stride) const {
    CVec blk(static_cast<size_t>(nxi) * Np, 0.0);
    const double w = hx / h;
    for (int j = 0; j < nx; ++j)
      for (int l = 0; l < nxi; ++l)
        blk[static_cast<size_t>(l) * Np + q[j]] =
            w * std::polar(1.0, lambda * xis[l] * xs[j]) * in[static_cast<size_t>(j) * nxi + l];
    fft_rows(blk, nxi, Np, -1);
    CVec acc(Np, 0.0);
    for (int l = 0; l < nxi; ++l) {
      const double* gt = &gtab[static_cast<size_t>(l) * Np];
      const cplx* b = &blk[static_cast<size_t>(l) * Np];
      for (int i = 0; i < Np; ++i) acc[i] += gt[i] * b[i];
    }
    fft_rows(acc, 1, Np, 1);
    const double c = scale * hxi / Np;
    for (int n = 0; n < N; ++n) out[n * stride] = c * acc[P + n];
  }

  FBILattice lattice(int m) const {
    FBILattice lat;
    lat.lambda = lambda;
    lat.m = m;
    lat.x_lo = x_lo;
    lat.hx = hx;
    lat.nx = nx;
    lat.xi_lo = -4.0;
    lat.hxi = hxi;
    lat.nxi = nxi;
    return lat;
  }
};

int check_grid(const GridSpec& g, double lambda) {
  const int m = g.ndim();
  if (m < 1 || m > 2) fail("fbi: only m = 1 and m = 2 are supported");
  if (m == 2 && (g.points[0] != g.points[1] || g.extent[0] != g.extent[1]))
    fail("fbi: m = 2 needs equal extents and point counts on both axes");
  if (!(lambda >= 1) || !std::isfinite(lambda)) fail("fbi: lambda must be >= 1");
  return m;
}

void check_size(const Axis& ax, int m, const FBIOptions& opt) {
  const double entries = std::pow(static_cast<double>(ax.line()), m);
  if (entries > static_cast<double>(opt.max_entries))
    fail("fbi: lattice has " + std::to_string(static_cast<long long>(entries)) +
         " entries, above the storage cap; use fbi_weighted_norm for norms");
}

void check_boundary(const GridSpec& g, const CVec& f) {
  double peak = 0, edge = 0;
  for (const auto& z : f) peak = std::max(peak, std::abs(z));
  const int N = g.points[0];
  auto on_edge = [&](int i) { return i == 0 || i == N - 1; };
  for (size_t i = 0; i < f.size(); ++i) {
    const int i0 = static_cast<int>(i % N), i1 = static_cast<int>(i / N);
    if (on_edge(i0) || (g.ndim() == 2 && on_edge(i1))) edge = std::max(edge, std::abs(f[i]));
  }
  if (edge > 1e-12 * peak) fail("fbi: input does not decay below 1e-12 at the sample-box boundary");
}

CVec forward_values(const Axis& ax, int m, const CVec& f) {
  const size_t L = ax.line();
  if (m == 1) {
    CVec out(L);
    ax.forward(f.data(), 1, out.data());
    return out;
  }
  const int N = ax.N, nx = ax.nx, nxi = ax.nxi;
  CVec w(static_cast<size_t>(N) * L);
  for (int r = 0; r < N; ++r) ax.forward(&f[static_cast<size_t>(r) * N], 1, &w[r * L]);
  CVec out(L * L), col(L);
  for (size_t c = 0; c < L; ++c) {
    ax.forward(&w[c], L, col.data());
    const size_t j1 = c / nxi, l1 = c % nxi;
    for (int j0 = 0; j0 < nx; ++j0)
      for (int l0 = 0; l0 < nxi; ++l0)
        out[((j0 * nx + j1) * nxi + l0) * nxi + l1] = col[static_cast<size_t>(j0) * nxi + l0];
  }
  return out;
}

CVec adjoint_values(const Axis& ax, int m, const CVec& v) {
  const size_t L = ax.line();
  const int N = ax.N, nx = ax.nx, nxi = ax.nxi;
  if (m == 1) {
    CVec out(N);
    ax.adjoint(v.data(), out.data(), 1);
    return out;
  }
  CVec w(static_cast<size_t>(N) * L), col(L);
  for (size_t c = 0; c < L; ++c) {
    const size_t j1 = c / nxi, l1 = c % nxi;
    for (int j0 = 0; j0 < nx; ++j0)
      for (int l0 = 0; l0 < nxi; ++l0)
        col[static_cast<size_t>(j0) * nxi + l0] = v[((j0 * nx + j1) * nxi + l0) * nxi + l1];
    ax.adjoint(col.data(), &w[c], L);
  }
  CVec out(static_cast<size_t>(N) * N);
  for (int r = 0; r < N; ++r) ax.adjoint(&w[r * L], &out[static_cast<size_t>(r) * N], 1);
  return out;
}

cplx eval_symbol(const RoughSymbol& a, const double* x, const double* z) {
  if (!a.terms.empty()) {
    cplx s = 0;
    for (const auto& t : a.terms) s += t.b(x) * t.c(z);
    return s;
  }
  return a.eval(x, z);
}

// Fourth-order centered difference of a in x (which = 0) or xi (which = 1), m = 1.
cplx symbol_derivative(const RoughSymbol& a, double x, double xi, int which) {
  const double d = 1e-3;
  auto at = [&](double t) {
    double xx = which == 0 ? x + t : x, zz = which == 1 ? xi + t : xi;
    return eval_symbol(a, &xx, &zz);
  };
  return (-at(2 * d) + 8.0 * at(d) - 8.0 * at(-d) + at(-2 * d)) / (12 * d);
}

const double kD4[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
const double kD2[3] = {-0.5, 0.0, 0.5};

// d/dx V and e^{-i lambda xi x} d/dxi (e^{i lambda xi x} V) at (j, l), centered differences (order 2 or 4).
cplx dx_at(const FBILattice& lat, const CVec& V, int j, int l, int order) {
  const int w = order / 2;
  const double* c = order == 4 ? kD4 : kD2;
  cplx s = 0;
  for (int t = -w; t <= w; ++t) s += c[t + w] * V[static_cast<size_t>(j + t) * lat.nxi + l];
  return s / lat.hx;
}

cplx dxi_at(const FBILattice& lat, const CVec& V, int j, int l, int order) {
  const int w = order / 2;
  const double* c = order == 4 ? kD4 : kD2;
  const double x = lat.x(j);
  cplx s = 0;
  for (int t = -w; t <= w; ++t)
    s += c[t + w] * std::polar(1.0, lat.lambda * t * lat.hxi * x) * V[static_cast<size_t>(j) * lat.nxi + l + t];
  return s / lat.hxi;
}

}  // namespace

size_t FBILattice::size() const {
  size_t line = static_cast<size_t>(nx) * nxi;
  return m == 1 ? line : line * line;
}

double FBILattice::cell() const { return std::pow(hx * hxi, m); }

double FBILattice::oversampling() const {
  const double xi_hi = xi_lo + (nxi - 1) * hxi;
  return hx * lambda * (xi_hi - xi_lo) / (2 * kPi);
}

bool FBILattice::same_as(const FBILattice& o) const {
  return lambda == o.lambda && m == o.m && nx == o.nx && nxi == o.nxi && std::abs(x_lo - o.x_lo) < 1e-12 &&
         std::abs(hx - o.hx) < 1e-15 && std::abs(hxi - o.hxi) < 1e-15 && xi_lo == o.xi_lo;
}

FBILattice fbi_lattice(const GridSpec& g, double lambda, const FBIOptions& opt) {
  const int m = check_grid(g, lambda);
  return Axis(g.extent[0], g.points[0], lambda, m, opt).lattice(m);
}

FBIRep fbi_forward(const GridSpec& g, const CVec& f, double lambda, const FBIOptions& opt) {
  const int m = check_grid(g, lambda);
  if (lambda < 4) fail("fbi_forward: lambda must be >= 4");
  if (f.size() != g.size()) fail("fbi_forward: input does not match the grid");
  check_boundary(g, f);
  Axis ax(g.extent[0], g.points[0], lambda, m, opt);
  check_size(ax, m, opt);
  return {ax.lattice(m), forward_values(ax, m, f)};
}

CVec fbi_adjoint(const FBIRep& F, const GridSpec& g, const FBIOptions& opt) {
  const int m = check_grid(g, F.lattice.lambda);
  Axis ax(g.extent[0], g.points[0], F.lattice.lambda, m, opt);
  if (!ax.lattice(m).same_as(F.lattice)) fail("fbi_adjoint: lattice does not belong to this grid");
  if (F.values.size() != F.lattice.size()) fail("fbi_adjoint: value count does not match the lattice");
  return adjoint_values(ax, m, F.values);
}

double fbi_norm(const FBIRep& F) {
  double s = 0;
  for (const auto& z : F.values) s += std::norm(z);
  return std::sqrt(s * F.lattice.cell());
}

cplx fbi_inner(const FBIRep& a, const FBIRep& b) {
  if (!a.lattice.same_as(b.lattice)) fail("fbi_inner: lattices differ");
  cplx s = 0;
  for (size_t i = 0; i < a.values.size(); ++i) s += std::conj(a.values[i]) * b.values[i];
  return s * a.lattice.cell();
}

double sample_norm(const GridSpec& g, const CVec& f) { return spectral::lq_norm(g, f, 2.0); }

cplx sample_inner(const GridSpec& g, const CVec& a, const CVec& b) {
  cplx s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s * g.cell_volume();
}

double fbi_weighted_norm(const GridSpec& g, const CVec& f, double lambda, const FBIOptions& opt) {
  const int m = check_grid(g, lambda);
  if (f.size() != g.size()) fail("fbi_weighted_norm: input does not match the grid");
  check_boundary(g, f);
  Axis ax(g.extent[0], g.points[0], lambda, m, opt);
  const int Np = ax.Np, N = ax.N;
  RVec S(Np, 0.0);
  for (int l = 0; l < ax.nxi; ++l)
    for (int i = 0; i < Np; ++i) S[i] += std::pow(ax.gtab[static_cast<size_t>(l) * Np + i], 2);
  for (auto& v : S) v *= ax.scale * ax.scale * ax.hxi * ax.h / Np;
  double total = 0;
  if (m == 1) {
    CVec buf(Np, 0.0);
    for (int n = 0; n < N; ++n) buf[ax.P + n] = f[n];
    fft_rows(buf, 1, Np, -1);
    for (int i = 0; i < Np; ++i) total += S[i] * std::norm(buf[i]);
  } else {
    GridSpec gp = make_grid({Np * ax.h, Np * ax.h}, {Np, Np}, false);
    CVec buf(gp.size(), 0.0);
    for (int r = 0; r < N; ++r)
      for (int n = 0; n < N; ++n) buf[static_cast<size_t>(ax.P + r) * Np + ax.P + n] = f[static_cast<size_t>(r) * N + n];
    fft_forward(gp, buf);
    for (int r = 0; r < Np; ++r)
      for (int n = 0; n < Np; ++n) total += S[r] * S[n] * std::norm(buf[static_cast<size_t>(r) * Np + n]);
  }
  return std::sqrt(total);
}

double cauchy_riemann_residual(const FBIRep& F, int order) {
  const FBILattice& lat = F.lattice;
  if (lat.m != 1) fail("cauchy_riemann_residual: m = 1 only");
  if (order != 2 && order != 4) fail("cauchy_riemann_residual: order must be 2 or 4");
  const int w = order / 2;
  double res = 0, ref = 0;
  for (int j = w; j < lat.nx - w; ++j)
    for (int l = w; l < lat.nxi - w; ++l) {
      const cplx dx = dx_at(lat, F.values, j, l, order);
      const cplx dxi = dxi_at(lat, F.values, j, l, order);
      res += std::norm(dx - cplx(0, 1) * dxi);
      ref += std::norm(dx);
    }
  return ref > 0 ? std::sqrt(res / ref) : 0.0;
}

GridSpec fbi_probe_grid(double lambda, int m) {
  if (!(lambda >= 4)) fail("fbi_probe_grid: lambda must be >= 4");
  const double sigma = 2.0 / std::sqrt(lambda);
  const double L = 2.0 * std::ceil(0.25 + 8 * sigma);
  const int N = std::max(8, 2 * static_cast<int>(std::ceil(L * lambda / 2 - 1e-9)));
  return make_grid(std::vector<double>(m, L), std::vector<int>(m, N), false);
}

CVec wave_packet_input(const GridSpec& g, double lambda, uint64_t seed, int packets, double width) {
  const int m = check_grid(g, lambda);
  const double sigma = width > 0 ? width : 2.0 / std::sqrt(lambda), L = g.extent[0];
  Rng rng(seed);
  CVec f(g.size(), 0.0);
  for (int p = 0; p < packets; ++p) {
    double c[2], k[2];
    for (int d = 0; d < m; ++d) c[d] = L / 2 + rng.uniform(-0.25, 0.25);
    if (m == 1) {
      k[0] = rng.uniform(-1.5, 1.5) * lambda;
    } else {
      const double r = 1.5 * lambda * std::sqrt(rng.uniform()), th = rng.uniform(0, 2 * kPi);
      k[0] = r * std::cos(th);
      k[1] = r * std::sin(th);
    }
    const cplx amp = rng.cnormal();
    for (size_t i = 0; i < f.size(); ++i) {
      double r2 = 0, ph = 0;
      size_t rem = i;
      for (int d = m - 1; d >= 0; --d) {
        const double y = g.coordinate(d, static_cast<int>(rem % g.points[d])) - c[d];
        rem /= g.points[d];
        r2 += y * y;
        ph += k[d] * y;
      }
      const double env = std::exp(-r2 / (2 * sigma * sigma));
      if (env > 1e-300) f[i] += amp * env * std::polar(1.0, ph);
    }
  }
  return f;
}

RemainderProbe conjugation_remainder(const RoughSymbol& a, double lambda, int order, uint64_t seed, int inputs) {
  if (order != 1 && order != 2) fail("conjugation_remainder: order must be 1 or 2");
  if (order == 2 && a.smoothness < 2) fail("conjugation_remainder: order 2 needs a symbol that is C^2 in x");
  if (inputs < 1) fail("conjugation_remainder: need at least one input");
  if (!a.eval && a.terms.empty()) fail("conjugation_remainder: symbol has no evaluator");
  GridSpec g = fbi_probe_grid(lambda, 1);
  // The symbol is given in coordinates centred on the probe box.
  const double c = g.extent[0] / 2;
  RoughSymbol sa = a;
  for (auto& t : sa.terms) t.b = [b = t.b, c](const double* x) { double y = x[0] - c; return b(&y); };
  if (a.eval) sa.eval = [e = a.eval, c](const double* x, const double* z) { double y = x[0] - c; return e(&y, z); };
  FBIOptions opt;
  Axis ax(g.extent[0], g.points[0], lambda, 1, opt);
  const FBILattice lat = ax.lattice(1);
  const int nx = lat.nx, nxi = lat.nxi;

  CVec av(lat.size()), dbar(lat.size());
  for (int j = 0; j < nx; ++j)
    for (int l = 0; l < nxi; ++l) {
      const size_t i = static_cast<size_t>(j) * nxi + l;
      double x = lat.x(j), z = lat.xi(l);
      av[i] = eval_symbol(sa, &x, &z);
      if (order == 2)
        dbar[i] = 0.5 * (symbol_derivative(sa, x, z, 0) - cplx(0, 1) * symbol_derivative(sa, x, z, 1));
    }

  QuantizeOptions qo;
  qo.budget = 1024;
  RemainderProbe out;
  out.lambda = lambda;
  out.order = order;
  out.inputs = inputs;
  out.seed = seed;
  SeedSplitter split(seed);
  const int w = 2;
  for (int t = 0; t < inputs; ++t) {
    CVec f = wave_packet_input(g, lambda, split.stream(t));
    CVec Af = quantize(sa, g, f, lambda, qo).field;
    CVec VA = forward_values(ax, 1, Af), V = forward_values(ax, 1, f);
    CVec R(lat.size(), 0.0);
    for (int j = w; j < nx - w; ++j)
      for (int l = w; l < nxi - w; ++l) {
        const size_t i = static_cast<size_t>(j) * nxi + l;
        cplx conj = av[i] * V[i];
        if (order == 2) {
          const cplx d = 0.5 * (dx_at(lat, V, j, l, 4) + cplx(0, 1) * dxi_at(lat, V, j, l, 4));
          conj += (2.0 / lambda) * dbar[i] * d;
        }
        R[i] = VA[i] - conj;
      }
    double rn = 0, wn = 0;
    for (int j = w; j < nx - w; ++j)
      for (int l = w; l < nxi - w; ++l) {
        rn += std::norm(R[static_cast<size_t>(j) * nxi + l]);
        if (l >= 2 * w && l < nxi - 2 * w) wn += std::norm(dxi_at(lat, R, j, l, 4));
      }
    const double fn = sample_norm(g, f);
    const double ratio = std::sqrt(rn * lat.cell()) / fn;
    out.ratios.push_back(ratio);
    out.norm_estimate = std::max(out.norm_estimate, ratio);
    out.weighted_estimate = std::max(out.weighted_estimate, std::sqrt(wn * lat.cell()) / fn);
  }
  return out;
}

double multiplier_constant(const RoughSymbol& a, const FBILattice& lat) {
  if (!a.eval && a.terms.empty()) fail("multiplier_constant: symbol has no evaluator");
  const int m = lat.m;
  const double hz = 0.02, zmax = 2.5;
  const int nz = static_cast<int>(std::lround(2 * zmax / hz)) + 1;
  const size_t nt = m == 1 ? nz : static_cast<size_t>(nz) * nz;
  // Lattice x samples, at most 9 per axis.
  std::vector<double> xs;
  const int step = std::max(1, (lat.nx - 1) / 8);
  for (int j = 0; j < lat.nx; j += step) xs.push_back(lat.x(j));

  auto diff = [&](const RVec& t, int axis) {
    RVec d(t.size(), 0.0);
    const size_t stride = (m == 2 && axis == 0) ? nz : 1;
    for (size_t i = 0; i < t.size(); ++i) {
      const int pos = static_cast<int>(m == 2 ? (axis == 0 ? i / nz : i % nz) : i);
      const double up = pos + 1 < nz ? t[i + stride] : 0.0, dn = pos > 0 ? t[i - stride] : 0.0;
      d[i] = (up - dn) / (2 * hz);
    }
    return d;
  };
  double best = 0;
  const size_t nxs = xs.size();
  const size_t combos = m == 1 ? nxs : nxs * nxs;
  for (size_t c = 0; c < combos; ++c) {
    double x[2] = {xs[c % nxs], m == 2 ? xs[c / nxs] : 0.0};
    RVec re(nt), im(nt);
    for (size_t i = 0; i < nt; ++i) {
      double z[2];
      z[0] = -zmax + (m == 1 ? i : i / nz) * hz;
      if (m == 2) z[1] = -zmax + (i % nz) * hz;
      const cplx v = eval_symbol(a, x, z);
      re[i] = v.real();
      im[i] = v.imag();
    }
    double total = 0;
    // All multi-indices with |alpha| <= m + 1.
    for (int a0 = 0; a0 <= m + 1; ++a0)
      for (int a1 = 0; a1 <= (m == 2 ? m + 1 - a0 : 0); ++a1) {
        RVec dr = re, di = im;
        for (int r = 0; r < a0; ++r) dr = diff(dr, 0), di = diff(di, 0);
        for (int r = 0; r < a1; ++r) dr = diff(dr, 1), di = diff(di, 1);
        double s = 0;
        for (size_t i = 0; i < nt; ++i) s += std::hypot(dr[i], di[i]);
        total += s * std::pow(hz, m);
      }
    best = std::max(best, total);
  }
  return best;
}

SandwichResult multiplier_sandwich(const RoughSymbol& a, const GridSpec& g, const CVec& f, double lambda, double p,
                                   double q, const FBIOptions& opt) {
  if (!a.eval && a.terms.empty()) fail("multiplier_sandwich: symbol has no evaluator");
  FBIRep F = fbi_forward(g, f, lambda, opt);
  const FBILattice& lat = F.lattice;
  for (size_t i = 0; i < F.values.size(); ++i) {
    double x[2], z[2];
    if (lat.m == 1) {
      x[0] = lat.x(static_cast<int>(i / lat.nxi));
      z[0] = lat.xi(static_cast<int>(i % lat.nxi));
    } else {
      const size_t xi_part = i % (static_cast<size_t>(lat.nxi) * lat.nxi), x_part = i / (static_cast<size_t>(lat.nxi) * lat.nxi);
      x[0] = lat.x(static_cast<int>(x_part / lat.nx));
      x[1] = lat.x(static_cast<int>(x_part % lat.nx));
      z[0] = lat.xi(static_cast<int>(xi_part / lat.nxi));
      z[1] = lat.xi(static_cast<int>(xi_part % lat.nxi));
    }
    F.values[i] *= eval_symbol(a, x, z);
  }
  SandwichResult res;
  res.field = fbi_adjoint(F, g, opt);
  auto norm = [&](const CVec& v) {
    if (lat.m == 1) return spectral::lq_norm(g, v, p);
    GridSpec gt = g;
    gt.includes_time = true;
    return spectral::mixed_norm(gt, v, p, q);
  };
  const double fn = norm(f);
  res.ratio = fn > 0 ? norm(res.field) / fn : 0.0;
  res.constant = multiplier_constant(a, lat);
  return res;
}

// "FBI1", u32 version, f64 lambda, u32 m, f64 x_lo, f64 hx, u32 nx, f64 xi_lo, f64 hxi, u32 nxi, complex data.
void write_fbi_snapshot(const std::string& path, const FBIRep& F) {
  static_assert(std::endian::native == std::endian::little, "snapshot writer assumes a little-endian host");
  if (F.values.size() != F.lattice.size()) fail("fbi snapshot: value count does not match the lattice");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "fbi snapshot: cannot open " + path);
  const FBILattice& L = F.lattice;
  const uint32_t ver = 1, m = L.m, nx = L.nx, nxi = L.nxi;
  os.write("FBI1", 4);
  os.write(reinterpret_cast<const char*>(&ver), 4);
  os.write(reinterpret_cast<const char*>(&L.lambda), 8);
  os.write(reinterpret_cast<const char*>(&m), 4);
  os.write(reinterpret_cast<const char*>(&L.x_lo), 8);
  os.write(reinterpret_cast<const char*>(&L.hx), 8);
  os.write(reinterpret_cast<const char*>(&nx), 4);
  os.write(reinterpret_cast<const char*>(&L.xi_lo), 8);
  os.write(reinterpret_cast<const char*>(&L.hxi), 8);
  os.write(reinterpret_cast<const char*>(&nxi), 4);
  os.write(reinterpret_cast<const char*>(F.values.data()), F.values.size() * sizeof(cplx));
  if (!os) throw Error(ErrorKind::Io, "fbi snapshot: write failed for " + path);
}

FBIRep read_fbi_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "fbi snapshot: cannot open " + path);
  char magic[4];
  uint32_t ver = 0, m = 0, nx = 0, nxi = 0;
  FBIRep F;
  FBILattice& L = F.lattice;
  is.read(magic, 4);
  is.read(reinterpret_cast<char*>(&ver), 4);
  if (!is || std::memcmp(magic, "FBI1", 4) != 0) throw Error(ErrorKind::Io, "fbi snapshot: bad magic");
  if (ver != 1) throw Error(ErrorKind::Io, "fbi snapshot: unsupported version " + std::to_string(ver));
  is.read(reinterpret_cast<char*>(&L.lambda), 8);
  is.read(reinterpret_cast<char*>(&m), 4);
  is.read(reinterpret_cast<char*>(&L.x_lo), 8);
  is.read(reinterpret_cast<char*>(&L.hx), 8);
  is.read(reinterpret_cast<char*>(&nx), 4);
  is.read(reinterpret_cast<char*>(&L.xi_lo), 8);
  is.read(reinterpret_cast<char*>(&L.hxi), 8);
  is.read(reinterpret_cast<char*>(&nxi), 4);
  if (!is || (m != 1 && m != 2)) throw Error(ErrorKind::Io, "fbi snapshot: truncated or invalid header");
  L.m = static_cast<int>(m);
  L.nx = static_cast<int>(nx);
  L.nxi = static_cast<int>(nxi);
  F.values.resize(L.size());
  is.read(reinterpret_cast<char*>(F.values.data()), F.values.size() * sizeof(cplx));
  if (!is) throw Error(ErrorKind::Io, "fbi snapshot: truncated data in " + path);
  return F;
}

}  // namespace m2d
