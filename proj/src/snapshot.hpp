#pragma once

#include <string>

#include "spectral.hpp"

namespace m2d {

// Binary layout: magic, u32 version, u32 dims[3], f64 extents[3], then row-major f64 data.
// dims/extents are (time, x1, x2); an absent time axis is stored as dim 1 and extent 0.
void write_field_snapshot(const std::string& path, const SpectralField& f);
SpectralField read_field_snapshot(const std::string& path);

// Single-component variant ("MXW1") used for gridded coefficients.
void write_scalar_snapshot(const std::string& path, const GridSpec& g, const RVec& v);
std::pair<GridSpec, RVec> read_scalar_snapshot(const std::string& path);

}  // namespace m2d
