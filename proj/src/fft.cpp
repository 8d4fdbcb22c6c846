#include "fft.hpp"

#include <fftw3.h>

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace m2d {

size_t GridSpec::size() const {
  size_t n = 1;
  for (int p : points) n *= static_cast<size_t>(p);
  return n;
}

double GridSpec::dt_implied() const {
  if (!includes_time) fail("grid has no time axis");
  return extent[0] / points[0];
}

double GridSpec::cell_volume() const {
  double v = 1;
  for (int a = 0; a < ndim(); ++a) v *= spacing(a);
  return v;
}

double GridSpec::spatial_cell_volume() const {
  double v = 1;
  for (int a = first_spatial(); a < ndim(); ++a) v *= spacing(a);
  return v;
}

size_t GridSpec::spatial_size() const {
  size_t n = 1;
  for (int a = first_spatial(); a < ndim(); ++a) n *= static_cast<size_t>(points[a]);
  return n;
}

double GridSpec::wavenumber(int axis, int i) const {
  const int n = points[axis];
  const int m = i < n / 2 ? i : i - n;
  return 2.0 * kPi * m / extent[axis];
}

bool GridSpec::same_as(const GridSpec& o) const {
  return points == o.points && extent == o.extent && includes_time == o.includes_time;
}

GridSpec make_grid(const std::vector<double>& extents, const std::vector<int>& points, bool includes_time) {
  if (extents.size() != points.size() || points.empty() || points.size() > 3)
    fail("make_grid: need 1 to 3 axes with matching extents");
  for (size_t a = 0; a < points.size(); ++a) {
    if (points[a] < 8 || points[a] % 2 != 0)
      fail("make_grid: point counts must be even and at least 8 (axis " + std::to_string(a) + ")");
    if (!(extents[a] > 0) || !std::isfinite(extents[a])) fail("make_grid: extents must be positive");
  }
  if (includes_time && points.size() < 2) fail("make_grid: a space-time grid needs a spatial axis");
  GridSpec g;
  g.extent = extents;
  g.points = points;
  g.includes_time = includes_time;
  return g;
}

namespace {

struct PlanKey {
  std::vector<int> dims;
  int sign;
  int howmany;
  int align_in;
  bool operator<(const PlanKey& o) const {
    return std::tie(dims, sign, howmany, align_in) < std::tie(o.dims, o.sign, o.howmany, o.align_in);
  }
};

std::mutex g_plan_mutex;
std::atomic<bool> g_deterministic{true};
std::map<PlanKey, fftw_plan>& plan_cache() {
  static std::map<PlanKey, fftw_plan> cache;
  return cache;
}

fftw_plan get_plan(const std::vector<int>& dims, int sign, int howmany, cplx* data) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data);
  const bool det = g_deterministic.load();
  // Deterministic plans ignore the buffer alignment so the same codelets run every time.
  PlanKey key{dims, sign, howmany, det ? -1 : fftw_alignment_of(reinterpret_cast<double*>(ptr))};
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto it = plan_cache().find(key);
  if (it != plan_cache().end()) return it->second;
  int dist = 1;
  for (int d : dims) dist *= d;
  // Plans are measured once on scratch storage and reused through the new-array interface.
  const size_t total = static_cast<size_t>(dist) * howmany;
  auto* scratch = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * total));
  if (!scratch) fail_numeric("fftw allocation failed");
  const unsigned flags = det ? FFTW_ESTIMATE | FFTW_UNALIGNED
                             : (total >= 4096 ? FFTW_MEASURE : FFTW_ESTIMATE) | (key.align_in ? FFTW_UNALIGNED : 0u);
  fftw_plan p = fftw_plan_many_dft(static_cast<int>(dims.size()), dims.data(), howmany, scratch, nullptr, 1, dist,
                                   scratch, nullptr, 1, dist, sign, flags);
  fftw_free(scratch);
  if (!p) fail_numeric("fftw planning failed");
  plan_cache()[key] = p;
  return p;
}

void run(const std::vector<int>& dims, int howmany, CVec& data, int sign) {
  if (data.empty()) return;
  fftw_plan p = get_plan(dims, sign, howmany, data.data());
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(p, ptr, ptr);
}

}  // namespace

void fft_set_deterministic(bool on) { g_deterministic.store(on); }
bool fft_deterministic() { return g_deterministic.load(); }

void fft_forward(const GridSpec& g, CVec& data) {
  if (data.size() != g.size()) fail("fft: field size does not match grid");
  run(g.points, 1, data, FFTW_FORWARD);
}

void fft_inverse(const GridSpec& g, CVec& data) {
  if (data.size() != g.size()) fail("fft: field size does not match grid");
  run(g.points, 1, data, FFTW_BACKWARD);
  const double s = 1.0 / static_cast<double>(g.size());
  for (auto& z : data) z *= s;
}

CVec fft(const GridSpec& g, const CVec& data) {
  CVec out = data;
  fft_forward(g, out);
  return out;
}

CVec ifft(const GridSpec& g, const CVec& data) {
  CVec out = data;
  fft_inverse(g, out);
  return out;
}

int fft_size_at_least(double lo) {
  long best = 1L << 40;
  for (long p2 = 2; p2 < best; p2 *= 2)
    for (long p = p2; p < best; p *= 3)
      if (p >= lo && p >= 8) best = p;
  return static_cast<int>(best);
}

void fft_rows(CVec& data, int rows, int n, int sign) {
  if (data.size() != static_cast<size_t>(rows) * n) fail("fft_rows: size mismatch");
  run({n}, rows, data, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD);
}

}  // namespace m2d
