#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "exclab/covariance.hpp"

namespace exclab {

// Regular grid covering Lambda_{R+2b} = [-(R+2b)/2, (R+2b)/2]^d, node i at
// coordinate -(L/2) + i*h with L = n*h. The node count per side must come
// out even (circulant embedding invariant).
struct GridSpec {
  int d = 2;
  double R = 64.0;
  double h = 0.5;
  double b = 0.0;

  void validate() const;  // throws ConfigInvalid

  int n() const;
  double extent() const { return n() * h; }
  double coord(int i) const { return -0.5 * extent() + i * h; }
  int index_of(double x) const;
  int64_t ncells() const;

  bool operator==(const GridSpec& o) const {
    return d == o.d && R == o.R && h == o.h && b == o.b;
  }
};

// Inclusive node-index box; unused axes are pinned to [0,0].
struct Box {
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{0, 0, 0};

  // Nodes with coordinates in center + [-side/2, side/2] per axis.
  static Box centered(const GridSpec& g, double side,
                      const Vec3& center = {0, 0, 0});
  bool contains(const GridSpec& g, const std::array<int, 3>& idx) const;
  bool inside_grid(const GridSpec& g) const;
  int64_t cells(int d) const;
};

struct FieldSample {
  GridSpec grid;
  CovarianceModel model;
  uint64_t seed = 0;
  uint64_t replicate = 0;
  std::vector<double> values;  // row-major, axis 0 fastest

  int64_t index(const std::array<int, 3>& idx) const {
    const int n = grid.n();
    int64_t r = idx[grid.d - 1];
    for (int a = grid.d - 2; a >= 0; --a) r = r * n + idx[a];
    return r;
  }
  double at(const std::array<int, 3>& idx) const { return values[index(idx)]; }
  double& at(const std::array<int, 3>& idx) { return values[index(idx)]; }
};

// Independent pair (f, f~); f^t = t f + sqrt(1-t^2) f~.
struct FieldPair {
  FieldSample f;
  FieldSample f_tilde;
  FieldSample interpolate(double t) const;  // throws MismatchedGrids
};

FieldSample interpolated_pair(const FieldSample& fs,
                              const FieldSample& fs_tilde, double t);

// Flat binary dump: one JSON header line, then n^d little-endian doubles.
void dump_field(const FieldSample& fs, const std::string& path);
FieldSample load_field(const std::string& path);

// Iterate all nodes of a box in index order (axis 0 fastest).
template <class F>
void for_each_node(const GridSpec& g, const Box& bx, F&& fn) {
  std::array<int, 3> idx{0, 0, 0};
  const int lo2 = (g.d >= 3) ? bx.lo[2] : 0, hi2 = (g.d >= 3) ? bx.hi[2] : 0;
  const int lo1 = (g.d >= 2) ? bx.lo[1] : 0, hi1 = (g.d >= 2) ? bx.hi[1] : 0;
  for (idx[2] = lo2; idx[2] <= hi2; ++idx[2])
    for (idx[1] = lo1; idx[1] <= hi1; ++idx[1])
      for (idx[0] = bx.lo[0]; idx[0] <= bx.hi[0]; ++idx[0]) fn(idx);
}

}  // namespace exclab
