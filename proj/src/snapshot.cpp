#include "snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace m2d {

static_assert(std::endian::native == std::endian::little, "snapshot writer assumes a little-endian host");

namespace {

constexpr uint32_t kVersion = 1;

void put_header(std::ofstream& os, const char* magic, const GridSpec& g) {
  if (g.ndim() > 3 || (!g.includes_time && g.ndim() > 2)) fail("snapshot: unsupported grid layout");
  uint32_t dims[3] = {1, 1, 1};
  double ext[3] = {0, 0, 0};
  int off = g.includes_time ? 0 : 1;
  for (int a = 0; a < g.ndim(); ++a) {
    dims[a + off] = static_cast<uint32_t>(g.points[a]);
    ext[a + off] = g.extent[a];
  }
  os.write(magic, 4);
  os.write(reinterpret_cast<const char*>(&kVersion), 4);
  os.write(reinterpret_cast<const char*>(dims), sizeof dims);
  os.write(reinterpret_cast<const char*>(ext), sizeof ext);
}

GridSpec get_header(std::ifstream& is, const char* magic) {
  char m[4];
  uint32_t ver = 0;
  uint32_t dims[3];
  double ext[3];
  is.read(m, 4);
  is.read(reinterpret_cast<char*>(&ver), 4);
  is.read(reinterpret_cast<char*>(dims), sizeof dims);
  is.read(reinterpret_cast<char*>(ext), sizeof ext);
  if (!is || std::memcmp(m, magic, 4) != 0) throw Error(ErrorKind::Io, "snapshot: bad magic or truncated header");
  if (ver != kVersion) throw Error(ErrorKind::Io, "snapshot: unsupported version " + std::to_string(ver));
  bool has_time = ext[0] > 0;
  std::vector<double> e;
  std::vector<int> p;
  for (int a = has_time ? 0 : 1; a < 3; ++a) {
    if (a > 0 && dims[a] == 1 && ext[a] == 0) continue;
    e.push_back(ext[a]);
    p.push_back(static_cast<int>(dims[a]));
  }
  return make_grid(e, p, has_time);
}

}  // namespace

void write_field_snapshot(const std::string& path, const SpectralField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "snapshot: cannot open " + path);
  put_header(os, "MXW2", f.grid());
  for (int c = 0; c < 3; ++c) os.write(reinterpret_cast<const char*>(f[c].data()), f[c].size() * sizeof(double));
  if (!os) throw Error(ErrorKind::Io, "snapshot: write failed for " + path);
}

SpectralField read_field_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "snapshot: cannot open " + path);
  GridSpec g = get_header(is, "MXW2");
  std::array<RVec, 3> c;
  for (auto& v : c) {
    v.resize(g.size());
    is.read(reinterpret_cast<char*>(v.data()), v.size() * sizeof(double));
  }
  if (!is) throw Error(ErrorKind::Io, "snapshot: truncated data in " + path);
  return SpectralField(g, c);
}

void write_scalar_snapshot(const std::string& path, const GridSpec& g, const RVec& v) {
  if (v.size() != g.size()) fail("snapshot: size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "snapshot: cannot open " + path);
  put_header(os, "MXW1", g);
  os.write(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

std::pair<GridSpec, RVec> read_scalar_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "snapshot: cannot open " + path);
  GridSpec g = get_header(is, "MXW1");
  RVec v(g.size());
  is.read(reinterpret_cast<char*>(v.data()), v.size() * sizeof(double));
  if (!is) throw Error(ErrorKind::Io, "snapshot: truncated data in " + path);
  return {g, v};
}

}  // namespace m2d
