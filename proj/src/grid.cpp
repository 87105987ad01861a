#include "exclab/grid.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "exclab/errors.hpp"

namespace exclab {

void GridSpec::validate() const {
  if (d < 1 || d > 3) throw ConfigInvalid("grid dimension must be in {1,2,3}");
  if (!(R > 0)) throw ConfigInvalid("grid side R must be > 0");
  if (!(h > 0)) throw ConfigInvalid("grid spacing h must be > 0");
  if (b < 0) throw ConfigInvalid("grid buffer b must be >= 0");
  const long m = std::lround((R + 2 * b) / h);
  if (m < 2 || m % 2 != 0)
    throw ConfigInvalid("cells per side round((R+2b)/h) must be even");
}

int GridSpec::n() const { return int(std::lround((R + 2 * b) / h)); }

int GridSpec::index_of(double x) const {
  return int(std::lround((x + 0.5 * extent()) / h));
}

int64_t GridSpec::ncells() const {
  int64_t r = 1;
  for (int a = 0; a < d; ++a) r *= n();
  return r;
}

Box Box::centered(const GridSpec& g, double side, const Vec3& center) {
  Box bx;
  const double eps = 1e-9 * g.h;
  for (int a = 0; a < g.d; ++a) {
    const double lo = center[a] - 0.5 * side;
    const double hi = center[a] + 0.5 * side;
    bx.lo[a] = int(std::ceil((lo + 0.5 * g.extent()) / g.h - eps));
    bx.hi[a] = int(std::floor((hi + 0.5 * g.extent()) / g.h + eps));
  }
  return bx;
}

bool Box::contains(const GridSpec& g, const std::array<int, 3>& idx) const {
  for (int a = 0; a < g.d; ++a)
    if (idx[a] < lo[a] || idx[a] > hi[a]) return false;
  return true;
}

bool Box::inside_grid(const GridSpec& g) const {
  for (int a = 0; a < g.d; ++a)
    if (lo[a] < 0 || hi[a] >= g.n() || lo[a] > hi[a]) return false;
  return true;
}

int64_t Box::cells(int d) const {
  int64_t r = 1;
  for (int a = 0; a < d; ++a) r *= int64_t(hi[a] - lo[a] + 1);
  return r;
}

FieldSample interpolated_pair(const FieldSample& fs,
                              const FieldSample& fs_tilde, double t) {
  if (!(fs.grid == fs_tilde.grid) ||
      fs.values.size() != fs_tilde.values.size())
    throw MismatchedGrids("interpolated_pair inputs differ in grid");
  FieldSample out = fs;
  const double c = std::sqrt(std::max(0.0, 1.0 - t * t));
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = t * fs.values[i] + c * fs_tilde.values[i];
  return out;
}

FieldSample FieldPair::interpolate(double t) const {
  return interpolated_pair(f, f_tilde, t);
}

void dump_field(const FieldSample& fs, const std::string& path) {
  nlohmann::json hdr;
  hdr["model"] = fs.model.to_json();
  hdr["grid"] = {{"d", fs.grid.d}, {"R", fs.grid.R}, {"h", fs.grid.h},
                 {"b", fs.grid.b}};
  hdr["seed"] = fs.seed;
  hdr["replicate"] = fs.replicate;
  hdr["count"] = fs.values.size();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << hdr.dump() << "\n";
  out.write(reinterpret_cast<const char*>(fs.values.data()),
            std::streamsize(fs.values.size() * sizeof(double)));
  if (!out) throw IoError("short write to '" + path + "'");
}

FieldSample load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  nlohmann::json hdr = nlohmann::json::parse(line);
  FieldSample fs;
  fs.model = CovarianceModel::from_json(hdr.at("model"));
  fs.grid.d = hdr["grid"]["d"];
  fs.grid.R = hdr["grid"]["R"];
  fs.grid.h = hdr["grid"]["h"];
  fs.grid.b = hdr["grid"]["b"];
  fs.seed = hdr["seed"];
  fs.replicate = hdr["replicate"];
  fs.values.resize(hdr["count"].get<size_t>());
  in.read(reinterpret_cast<char*>(fs.values.data()),
          std::streamsize(fs.values.size() * sizeof(double)));
  if (size_t(in.gcount()) != fs.values.size() * sizeof(double))
    throw IoError("short read from '" + path + "'");
  return fs;
}

}  // namespace exclab
