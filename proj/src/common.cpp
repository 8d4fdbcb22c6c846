#include "common.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace m2d {

void fail(const std::string& msg) { throw Error(ErrorKind::InvalidArgument, msg); }
void fail_numeric(const std::string& msg) { throw Error(ErrorKind::Numerical, msg); }

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t SeedSplitter::stream(uint64_t id) const { return splitmix64(root_ ^ splitmix64(id + 0x5851F42D4C957F2DULL)); }

double Rng::uniform(double a, double b) {
  // 53 random bits mapped to [0,1)
  double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  return a + (b - a) * u;
}

double Rng::normal() {
  // Box-Muller keeps the stream platform independent.
  double u1 = uniform();
  double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

cplx Rng::cnormal() {
  double a = normal();
  double b = normal();
  return {a / std::sqrt(2.0), b / std::sqrt(2.0)};
}

LinearFit linear_fit(const RVec& x, const RVec& y) {
  if (x.size() != y.size() || x.size() < 2) fail("linear_fit: need at least two matching points");
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) fail("linear_fit: degenerate abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (size_t i = 0; i < n; ++i) {
    double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
    f.max_abs_residual = std::max(f.max_abs_residual, std::abs(r));
  }
  f.slope_stderr = n > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
  return f;
}

std::vector<double> fit_two_regressors(const RVec& x, const RVec& z, const RVec& y) {
  const int n = static_cast<int>(y.size());
  if (n < 3) fail("fit_two_regressors: need at least three points");
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    A(i, 0) = x[i];
    A(i, 1) = z[i];
    A(i, 2) = 1.0;
    b(i) = y[i];
  }
  Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  return {c(0), c(1), c(2)};
}

std::pair<double, double> bootstrap_slope_ci(const RVec& x, const RVec& y, int resamples, uint64_t seed,
                                             double level) {
  Rng rng(seed);
  const size_t n = x.size();
  RVec slopes;
  slopes.reserve(resamples);
  for (int r = 0; r < resamples; ++r) {
    RVec bx(n), by(n);
    for (size_t i = 0; i < n; ++i) {
      size_t j = static_cast<size_t>(rng.uniform() * n) % n;
      bx[i] = x[j];
      by[i] = y[j];
    }
    double mx = 0;
    for (double v : bx) mx += v;
    mx /= n;
    double sxx = 0;
    for (double v : bx) sxx += (v - mx) * (v - mx);
    if (sxx == 0) continue;
    slopes.push_back(linear_fit(bx, by).slope);
  }
  if (slopes.empty()) return {0.0, 0.0};
  std::sort(slopes.begin(), slopes.end());
  double lo = (1.0 - level) / 2.0;
  auto pick = [&](double q) {
    size_t i = static_cast<size_t>(std::clamp(q * (slopes.size() - 1), 0.0, double(slopes.size() - 1)));
    return slopes[i];
  };
  return {pick(lo), pick(1.0 - lo)};
}

double l2norm(const CVec& v) {
  double s = 0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

double l2norm(const RVec& v) {
  double s = 0;
  for (double z : v) s += z * z;
  return std::sqrt(s);
}

CVec to_complex(const RVec& v) { return CVec(v.begin(), v.end()); }

RVec real_part(const CVec& v) {
  RVec r(v.size());
  for (size_t i = 0; i < v.size(); ++i) r[i] = v[i].real();
  return r;
}

void gauss_legendre(int n, double a, double b, RVec& nodes, RVec& weights) {
  if (n < 1) fail("gauss_legendre: need at least one node");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5)), dp = 1;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = 0;
      for (int k = 1; k <= n; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1);
      double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double w = 2.0 / ((1 - z * z) * dp * dp);
    nodes[i] = mid - half * z;
    nodes[n - 1 - i] = mid + half * z;
    weights[i] = weights[n - 1 - i] = half * w;
  }
}

}  // namespace m2d
