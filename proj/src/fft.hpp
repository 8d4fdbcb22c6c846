#pragma once

#include "common.hpp"

namespace m2d {

// Axis layout: with a time axis it is axis 0, spatial axes follow. Row-major storage.
struct GridSpec {
  std::vector<double> extent;
  std::vector<int> points;
  bool includes_time = false;

  int ndim() const { return static_cast<int>(points.size()); }
  size_t size() const;
  int first_spatial() const { return includes_time ? 1 : 0; }
  int spatial_dims() const { return ndim() - first_spatial(); }
  double spacing(int axis) const { return extent[axis] / points[axis]; }
  double dt_implied() const;
  double cell_volume() const;
  double spatial_cell_volume() const;
  size_t spatial_size() const;
  size_t time_points() const { return includes_time ? points[0] : 1; }
  // Angular wavenumber of FFT index i on an axis (standard ordering).
  double wavenumber(int axis, int i) const;
  bool is_nyquist(int axis, int i) const { return i == points[axis] / 2; }
  double nyquist(int axis) const { return kPi * points[axis] / extent[axis]; }
  double coordinate(int axis, int i) const { return spacing(axis) * i; }
  bool same_as(const GridSpec& o) const;
};

GridSpec make_grid(const std::vector<double>& extents, const std::vector<int>& points, bool includes_time);

// Complex FFT over every axis; forward is unnormalized, inverse divides by the point count.
void fft_forward(const GridSpec& g, CVec& data);
void fft_inverse(const GridSpec& g, CVec& data);
CVec fft(const GridSpec& g, const CVec& data);
CVec ifft(const GridSpec& g, const CVec& data);

// Estimate-only, alignment-independent plans (the default): bitwise reproducible results.
// Off: measured plans keyed on buffer alignment.
void fft_set_deterministic(bool on);
bool fft_deterministic();

// Smallest 2^a 3^b that is >= lo and >= 8.
int fft_size_at_least(double lo);

// 1-D helpers for batched transforms along the last axis.
void fft_rows(CVec& data, int rows, int n, int sign);

}  // namespace m2d
