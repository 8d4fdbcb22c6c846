#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace m2d {

using cplx = std::complex<double>;
using RVec = std::vector<double>;
using CVec = std::vector<cplx>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorKind { InvalidArgument, Config, Numerical, Io };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind k, const std::string& msg) : std::runtime_error(msg), kind_(k) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(const std::string& msg);
[[noreturn]] void fail_numeric(const std::string& msg);

// Counter-based splitter: one 64-bit root seed, independent streams by id.
uint64_t splitmix64(uint64_t x);

class SeedSplitter {
 public:
  explicit SeedSplitter(uint64_t root) : root_(root) {}
  uint64_t stream(uint64_t id) const;
  uint64_t root() const { return root_; }

 private:
  uint64_t root_;
};

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(splitmix64(seed)) {}
  double uniform(double a = 0.0, double b = 1.0);
  double normal();
  cplx cnormal();
  uint64_t next() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

struct LinearFit {
  double slope = 0, intercept = 0;
  double slope_stderr = 0;
  double max_abs_residual = 0;
};

LinearFit linear_fit(const RVec& x, const RVec& y);

// Fit y = a*x + b*z + c by least squares; returns (a, b, c).
std::vector<double> fit_two_regressors(const RVec& x, const RVec& z, const RVec& y);

// Percentile bootstrap interval of the least-squares slope.
std::pair<double, double> bootstrap_slope_ci(const RVec& x, const RVec& y, int resamples, uint64_t seed,
                                             double level = 0.95);

double l2norm(const CVec& v);
double l2norm(const RVec& v);
CVec to_complex(const RVec& v);
RVec real_part(const CVec& v);

// n-point Gauss-Legendre rule on [a, b].
void gauss_legendre(int n, double a, double b, RVec& nodes, RVec& weights);

}  // namespace m2d
