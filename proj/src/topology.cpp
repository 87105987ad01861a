#include "exclab/topology.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>

#include "exclab/errors.hpp"

namespace exclab {

namespace {

struct UnionFind {
  std::vector<int32_t> parent;
  explicit UnionFind(size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int32_t find(int32_t a) {
    while (parent[size_t(a)] != a) {
      parent[size_t(a)] = parent[size_t(parent[size_t(a)])];
      a = parent[size_t(a)];
    }
    return a;
  }
  void unite(int32_t a, int32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[size_t(std::max(a, b))] = std::min(a, b);
  }
};

// Neighbor offsets: all 3^d-1 for max connectivity (8/26), axis-only for
// min connectivity (4/6).
std::vector<std::array<int, 3>> neighbor_offsets(int d, bool max_conn) {
  std::vector<std::array<int, 3>> offs;
  const int l1 = 1, l2 = (d >= 2) ? 1 : 0, l3 = (d >= 3) ? 1 : 0;
  for (int c = -l3; c <= l3; ++c)
    for (int b = -l2; b <= l2; ++b)
      for (int a = -l1; a <= l1; ++a) {
        if (a == 0 && b == 0 && c == 0) continue;
        const int nz = (a != 0) + (b != 0) + (c != 0);
        if (!max_conn && nz != 1) continue;
        offs.push_back({a, b, c});
      }
  return offs;
}

int64_t linear_index(int d, int n, const std::array<int, 3>& idx) {
  int64_t r = idx[d - 1];
  for (int a = d - 2; a >= 0; --a) r = r * n + idx[a];
  return r;
}

void delinearize(int d, int n, int64_t lin, std::array<int, 3>& idx) {
  idx = {0, 0, 0};
  for (int a = 0; a < d; ++a) {
    idx[a] = int(lin % n);
    lin /= n;
  }
}

bool on_grid_edge(int d, int n, const std::array<int, 3>& idx) {
  for (int a = 0; a < d; ++a)
    if (idx[a] == 0 || idx[a] == n - 1) return true;
  return false;
}

// Compact raw union-find roots into 1-based labels and fill the component
// table (shared by both labeling implementations).
ExcursionGeometry finalize_labels(const BinaryGrid& bg,
                                  std::vector<int32_t>&& raw) {
  const int d = bg.d, n = bg.n;
  const int64_t total = int64_t(bg.cells.size());
  ExcursionGeometry geom;
  geom.d = d;
  geom.n = n;
  geom.labels.assign(size_t(total), 0);
  std::vector<int32_t> remap(size_t(total), 0);
  int32_t next = 0;
  std::array<int, 3> idx{0, 0, 0};
  for (int64_t lin = 0; lin < total; ++lin) {
    if (raw[size_t(lin)] < 0) continue;
    const int32_t root = raw[size_t(lin)];
    int32_t lab = remap[size_t(root)];
    if (lab == 0) {
      lab = ++next;
      remap[size_t(root)] = lab;
      geom.comps.emplace_back();
      auto& ci = geom.comps.back();
      delinearize(d, n, lin, idx);
      ci.bb_lo = idx;
      ci.bb_hi = idx;
    }
    geom.labels[size_t(lin)] = lab;
    auto& ci = geom.comps[size_t(lab - 1)];
    ci.cells += 1;
    delinearize(d, n, lin, idx);
    for (int a = 0; a < d; ++a) {
      ci.bb_lo[a] = std::min(ci.bb_lo[a], idx[a]);
      ci.bb_hi[a] = std::max(ci.bb_hi[a], idx[a]);
    }
    if (on_grid_edge(d, n, idx)) ci.touches_grid_edge = true;
  }
  return geom;
}

// d=2 hole counts: enclosed background 4-components, attributed to the
// surrounding foreground component (the cell left of the hole's first cell
// in scan order is foreground by 4-connectivity of the hole).
void fill_holes_2d(const BinaryGrid& bg, ExcursionGeometry& geom) {
  if (bg.d != 2) return;
  const int n = bg.n;
  std::vector<int32_t> bglab(bg.cells.size(), 0);
  int32_t next = 0;
  std::vector<char> touches;
  std::vector<int64_t> firstcell;
  std::deque<int64_t> queue;
  for (int64_t start = 0; start < int64_t(bg.cells.size()); ++start) {
    if (bg.cells[size_t(start)] != 0 || bglab[size_t(start)] != 0) continue;
    const int32_t lab = ++next;
    touches.push_back(0);
    firstcell.push_back(start);
    bglab[size_t(start)] = lab;
    queue.push_back(start);
    while (!queue.empty()) {
      const int64_t cur = queue.front();
      queue.pop_front();
      const int cx = int(cur % n), cy = int(cur / n);
      if (cx == 0 || cx == n - 1 || cy == 0 || cy == n - 1)
        touches[size_t(lab - 1)] = 1;
      const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int nx = cx + dx[k], ny = cy + dy[k];
        if (nx < 0 || nx >= n || ny < 0 || ny >= n) continue;
        const int64_t nb = int64_t(ny) * n + nx;
        if (bg.cells[size_t(nb)] != 0 || bglab[size_t(nb)] != 0) continue;
        bglab[size_t(nb)] = lab;
        queue.push_back(nb);
      }
    }
  }
  for (int32_t lab = 1; lab <= next; ++lab) {
    if (touches[size_t(lab - 1)]) continue;
    const int64_t fc = firstcell[size_t(lab - 1)];
    const int cx = int(fc % n), cy = int(fc / n);
    // Scan left from the hole's first (lowest-index) cell to its enclosing
    // foreground component.
    int x = cx - 1;
    while (x >= 0 && bg.cells[size_t(int64_t(cy) * n + x)] == 0) --x;
    if (x < 0) continue;  // unreachable for a non-edge-touching component
    const int32_t owner = geom.labels[size_t(int64_t(cy) * n + x)];
    if (owner > 0) geom.comps[size_t(owner - 1)].holes += 1;
  }
}

bool box_in_grid(int d, int n, const Box& D) {
  for (int a = 0; a < d; ++a)
    if (D.lo[a] < 0 || D.hi[a] >= n || D.lo[a] > D.hi[a]) return false;
  return true;
}

bool on_box_shell(int d, const Box& D, const std::array<int, 3>& idx) {
  for (int a = 0; a < d; ++a)
    if (idx[a] == D.lo[a] || idx[a] == D.hi[a]) return true;
  return false;
}

// Per-component presence flags within D: bit 1 = has a cell in D, bit 2 =
// has a cell on the shell of D.
std::vector<uint8_t> presence_flags(const ExcursionGeometry& geom,
                                    const Box& D) {
  if (!box_in_grid(geom.d, geom.n, D))
    throw DomainOutsideGrid("domain box exceeds labeled grid");
  std::vector<uint8_t> flags(geom.comps.size(), 0);
  const int d = geom.d;
  std::array<int, 3> cur{0, 0, 0};
  const int lo2 = (d >= 3) ? D.lo[2] : 0, hi2 = (d >= 3) ? D.hi[2] : 0;
  const int lo1 = (d >= 2) ? D.lo[1] : 0, hi1 = (d >= 2) ? D.hi[1] : 0;
  for (cur[2] = lo2; cur[2] <= hi2; ++cur[2])
    for (cur[1] = lo1; cur[1] <= hi1; ++cur[1])
      for (cur[0] = D.lo[0]; cur[0] <= D.hi[0]; ++cur[0]) {
        const int32_t lab = geom.label_at(cur);
        if (lab == 0) continue;
        flags[size_t(lab - 1)] |= 1;
        if (on_box_shell(d, D, cur)) flags[size_t(lab - 1)] |= 2;
      }
  return flags;
}

double phi_value(const FunctionalSpec& spec, const ComponentInfo& ci) {
  switch (spec.phi) {
    case PhiKind::Count: return 1.0;
    case PhiKind::HoleIndicator: return ci.holes == 1 ? 1.0 : 0.0;
    case PhiKind::Zero: return 0.0;
    case PhiKind::Euler: break;
  }
  throw ConfigInvalid("Euler phi is not a component-sum functional");
}

}  // namespace

BinaryGrid extract_excursion(const FieldSample& fs,
                             const FunctionalSpec& spec) {
  BinaryGrid bg;
  bg.d = fs.grid.d;
  bg.n = fs.grid.n();
  bg.cells.resize(fs.values.size());
  const double lvl = spec.level;
  if (spec.set_type == SetType::Excursion) {
    for (size_t i = 0; i < fs.values.size(); ++i)
      bg.cells[i] = fs.values[i] >= lvl ? 1 : 0;
  } else {
    const double half = 0.5 * fs.grid.h;
    for (size_t i = 0; i < fs.values.size(); ++i)
      bg.cells[i] = std::abs(fs.values[i] - lvl) <= half ? 1 : 0;
  }
  return bg;
}

ExcursionGeometry label_components(const BinaryGrid& bg,
                                   bool foreground_max_conn) {
  const int d = bg.d, n = bg.n;
  const int64_t total = int64_t(bg.cells.size());
  const auto offs = neighbor_offsets(d, foreground_max_conn);
  // Only "previous" neighbors (negative linear delta) during the scan.
  std::vector<std::pair<std::array<int, 3>, int64_t>> prev;
  for (const auto& o : offs) {
    const int64_t delta = int64_t(o[2]) * n * n + int64_t(o[1]) * n + o[0];
    if (delta < 0) prev.push_back({o, delta});
  }
  UnionFind uf{size_t(total)};
  std::array<int, 3> idx{0, 0, 0};
  for (int64_t lin = 0; lin < total; ++lin) {
    if (!bg.cells[size_t(lin)]) continue;
    delinearize(d, n, lin, idx);
    for (const auto& [o, delta] : prev) {
      bool ok = true;
      for (int a = 0; a < d; ++a) {
        const int v = idx[a] + o[a];
        if (v < 0 || v >= n) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      const int64_t nb = lin + delta;
      if (bg.cells[size_t(nb)]) uf.unite(int32_t(lin), int32_t(nb));
    }
  }
  std::vector<int32_t> raw(size_t(total), -1);
  for (int64_t lin = 0; lin < total; ++lin)
    if (bg.cells[size_t(lin)]) raw[size_t(lin)] = uf.find(int32_t(lin));
  auto geom = finalize_labels(bg, std::move(raw));
  fill_holes_2d(bg, geom);
  return geom;
}

ExcursionGeometry label_components_reference(const BinaryGrid& bg,
                                             bool foreground_max_conn) {
  const int d = bg.d, n = bg.n;
  const int64_t total = int64_t(bg.cells.size());
  const auto offs = neighbor_offsets(d, foreground_max_conn);
  std::vector<int32_t> raw(size_t(total), -1);
  std::deque<int64_t> queue;
  std::array<int, 3> idx{0, 0, 0};
  for (int64_t start = 0; start < total; ++start) {
    if (!bg.cells[size_t(start)] || raw[size_t(start)] >= 0) continue;
    raw[size_t(start)] = int32_t(start);
    queue.push_back(start);
    while (!queue.empty()) {
      const int64_t cur = queue.front();
      queue.pop_front();
      delinearize(d, n, cur, idx);
      for (const auto& o : offs) {
        auto nb = idx;
        bool ok = true;
        for (int a = 0; a < d; ++a) {
          nb[a] += o[a];
          if (nb[a] < 0 || nb[a] >= n) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        const int64_t nl = linear_index(d, n, nb);
        if (!bg.cells[size_t(nl)] || raw[size_t(nl)] >= 0) continue;
        raw[size_t(nl)] = int32_t(start);
        queue.push_back(nl);
      }
    }
  }
  auto geom = finalize_labels(bg, std::move(raw));
  fill_holes_2d(bg, geom);
  return geom;
}

int64_t component_count(const ExcursionGeometry& geom, const Box& D) {
  const auto flags = presence_flags(geom, D);
  int64_t count = 0;
  for (uint8_t fl : flags)
    if (fl == 1) ++count;
  return count;
}

double bounded_functional(const ExcursionGeometry& geom,
                          const FunctionalSpec& spec, const Box& D) {
  const auto flags = presence_flags(geom, D);
  double sum = 0;
  for (size_t i = 0; i < flags.size(); ++i)
    if (flags[i] == 1) sum += phi_value(spec, geom.comps[i]);
  return sum;
}

double inclusive_functional(const ExcursionGeometry& geom,
                            const FunctionalSpec& spec, const Box& D) {
  const auto flags = presence_flags(geom, D);
  double sum = 0;
  for (size_t i = 0; i < flags.size(); ++i)
    if (flags[i] & 1) sum += phi_value(spec, geom.comps[i]);
  return sum;
}

int64_t euler_characteristic_cubical(const BinaryGrid& bg, const Box& D,
                                     bool periodic) {
  const int d = bg.d, n = bg.n;
  Box dom = D;
  if (periodic) {
    for (int a = 0; a < d; ++a) {
      dom.lo[a] = 0;
      dom.hi[a] = n - 1;
    }
  } else if (!box_in_grid(d, n, D)) {
    throw DomainOutsideGrid("euler domain exceeds grid");
  }
  const int nsub = 1 << d;
  int64_t chi = 0;
  std::array<int, 3> idx{0, 0, 0};
  const int lo2 = (d >= 3) ? dom.lo[2] : 0, hi2 = (d >= 3) ? dom.hi[2] : 0;
  const int lo1 = (d >= 2) ? dom.lo[1] : 0, hi1 = (d >= 2) ? dom.hi[1] : 0;
  for (idx[2] = lo2; idx[2] <= hi2; ++idx[2])
    for (idx[1] = lo1; idx[1] <= hi1; ++idx[1])
      for (idx[0] = dom.lo[0]; idx[0] <= dom.hi[0]; ++idx[0]) {
        if (!bg.at(idx)) continue;
        for (int sub = 0; sub < nsub; ++sub) {
          // Cell spanned by idx and idx + e_S; all corners must be
          // foreground (and in the domain when not periodic).
          bool present = true;
          for (int corner = 0; corner < nsub && present; ++corner) {
            if ((corner & ~sub) != 0) continue;  // corners within the span
            auto c = idx;
            for (int a = 0; a < d; ++a)
              if (corner & (1 << a)) c[a] += 1;
            if (periodic) {
              for (int a = 0; a < d; ++a)
                if (c[a] >= n) c[a] -= n;
            } else {
              for (int a = 0; a < d; ++a)
                if (c[a] > dom.hi[a]) {
                  present = false;
                  break;
                }
            }
            if (present && !bg.at(c)) present = false;
          }
          if (present) chi += (std::popcount(unsigned(sub)) % 2 == 0) ? 1 : -1;
        }
      }
  return chi;
}

int64_t euler_characteristic_morse(const FieldSample& fs, double level,
                                   const Box& D) {
  const int d = fs.grid.d, n = fs.grid.n();
  if (!box_in_grid(d, n, D))
    throw DomainOutsideGrid("morse domain exceeds grid");

  double vmin = fs.values[0], vmax = fs.values[0];
  for (double v : fs.values) {
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  const double tie_tol = 1e-12 * std::max(1.0, vmax - vmin);

  int64_t chi = 0;
  // Strata: per axis interior (0), lo face (1), hi face (2).
  std::array<int, 3> sig{0, 0, 0};
  const int s1 = 3, s2 = (d >= 2) ? 3 : 1, s3 = (d >= 3) ? 3 : 1;
  for (sig[2] = 0; sig[2] < s3; ++sig[2])
    for (sig[1] = 0; sig[1] < s2; ++sig[1])
      for (sig[0] = 0; sig[0] < s1; ++sig[0]) {
        Box range;
        int kfree = 0;
        bool empty = false;
        for (int a = 0; a < d; ++a) {
          if (sig[a] == 0) {
            range.lo[a] = D.lo[a] + 1;
            range.hi[a] = D.hi[a] - 1;
            ++kfree;
          } else {
            range.lo[a] = range.hi[a] = (sig[a] == 1) ? D.lo[a] : D.hi[a];
          }
          if (range.lo[a] > range.hi[a]) empty = true;
        }
        if (empty) continue;
        std::array<int, 3> idx{0, 0, 0};
        const int lo2 = (d >= 3) ? range.lo[2] : 0,
                  hi2 = (d >= 3) ? range.hi[2] : 0;
        const int lo1 = (d >= 2) ? range.lo[1] : 0,
                  hi1 = (d >= 2) ? range.hi[1] : 0;
        for (idx[2] = lo2; idx[2] <= hi2; ++idx[2])
          for (idx[1] = lo1; idx[1] <= hi1; ++idx[1])
            for (idx[0] = range.lo[0]; idx[0] <= range.hi[0]; ++idx[0]) {
              const double v = fs.at(idx);
              // In-stratum criticality: both neighbors on the same side
              // along every free axis.
              bool critical = true, ambiguous = false;
              int down = 0;
              for (int a = 0; a < d && critical; ++a) {
                if (sig[a] != 0) continue;
                auto p = idx, q = idx;
                p[a] += 1;
                q[a] -= 1;
                const double dp = fs.at(p) - v, dq = fs.at(q) - v;
                if (dp == 0 || dq == 0) {
                  ambiguous = true;
                  break;
                }
                if (dp < 0 && dq < 0)
                  ++down;
                else if (!(dp > 0 && dq > 0))
                  critical = false;
              }
              if (!critical || ambiguous) continue;
              // Outward-normal condition: field decreases moving into the
              // domain along every pinned axis.
              bool inward_down = true;
              for (int a = 0; a < d && inward_down; ++a) {
                if (sig[a] == 0) continue;
                auto p = idx;
                p[a] += (sig[a] == 1) ? 1 : -1;
                if (!(fs.at(p) < v)) inward_down = false;
              }
              if (!inward_down) continue;
              if (v < level) continue;
              if (std::abs(v - level) <= tie_tol)
                throw LevelAtCriticalValue(
                    "critical value within tie tolerance of the level");
              chi += ((kfree - down) % 2 == 0) ? 1 : -1;
            }
      }
  return chi;
}

std::pair<std::vector<int32_t>, std::vector<int32_t>> split_by_a_planes(
    const ExcursionGeometry& geom, const GridSpec& grid, double a,
    const Box& D) {
  if (!(a >= 2 * grid.h - 1e-12))
    throw BadScale("a must be at least 2h");
  const double ah = a / grid.h;
  if (std::abs(ah - std::lround(ah)) > 1e-9)
    throw BadScale("a must be a multiple of h");
  const auto flags = presence_flags(geom, D);
  std::vector<int32_t> big, small;
  const double eps = 1e-9 * grid.h;
  for (size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] != 1) continue;
    const auto& ci = geom.comps[i];
    bool two_planes = false;
    for (int ax = 0; ax < geom.d && !two_planes; ++ax) {
      const double xmin = grid.coord(ci.bb_lo[ax]);
      const double xmax = grid.coord(ci.bb_hi[ax]);
      const long planes = long(std::floor(xmax / a + eps)) -
                          long(std::ceil(xmin / a - eps)) + 1;
      if (planes >= 2) two_planes = true;
    }
    (two_planes ? big : small).push_back(int32_t(i + 1));
  }
  return {big, small};
}

DecompositionResult multiscale_decompose(const FieldSample& fs,
                                         const FunctionalSpec& spec, double R,
                                         double r, double a) {
  const GridSpec& g = fs.grid;
  const int d = g.d, n = g.n();
  const double h = g.h;
  auto as_cells = [&](double v, const char* what) {
    const double c = v / h;
    if (std::abs(c - std::lround(c)) > 1e-9)
      throw BadScale(std::string(what) + " is not a multiple of h");
    return long(std::lround(c));
  };
  const long Rh = as_cells(R, "R"), rh = as_cells(r, "r"),
             ah = as_cells(a, "a");
  if (ah < 2) throw BadScale("a must be at least 2h");
  if (rh % ah != 0 || (rh / ah) % 2 != 0 || rh / ah <= 0)
    throw BadScale("r/a not in 2N");
  const long sh = rh + 4 * ah;
  if (Rh % sh != 0 || (Rh / sh) % 2 != 0)
    throw BadScale("R/(r+4a) not in 2N");

  if (spec.phi == PhiKind::Euler)
    throw ConfigInvalid("multiscale decomposition applies to component sums");

  const Box D = Box::centered(g, R);
  if (!D.inside_grid(g)) throw DomainOutsideGrid("Lambda_R exceeds grid");

  const auto bg = extract_excursion(fs, spec);
  const auto geom = label_components(bg);
  const auto flags = presence_flags(geom, D);

  // Per-axis, per-node mesobox position: tile index and whether the node is
  // strictly inside the open mesobox of its tile (equivalently, off the
  // mesobox's discrete shell). Integer node coordinates ic = i - n/2.
  const int ncomp = int(geom.comps.size());
  std::vector<long> tile_of(static_cast<size_t>(n));
  std::vector<char> interior_of(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const long ic = i - n / 2;
    long j = ic >= 0 ? ic / sh : -((-ic + sh - 1) / sh);
    const long p = ic - j * sh;
    tile_of[size_t(i)] = j;
    interior_of[size_t(i)] =
        (p >= 2 * ah + 1 && p <= 2 * ah + rh - 1) ? 1 : 0;
  }

  struct CompAgg {
    bool seen = false;
    bool all_interior = true;
    bool any_interior = false;
    bool same_tile = true;
    std::array<long, 3> tile{0, 0, 0};
  };
  std::vector<CompAgg> agg(static_cast<size_t>(ncomp));
  std::array<int, 3> idx{0, 0, 0};
  const int lo2 = (d >= 3) ? D.lo[2] : 0, hi2 = (d >= 3) ? D.hi[2] : 0;
  const int lo1 = (d >= 2) ? D.lo[1] : 0, hi1 = (d >= 2) ? D.hi[1] : 0;
  for (idx[2] = lo2; idx[2] <= hi2; ++idx[2])
    for (idx[1] = lo1; idx[1] <= hi1; ++idx[1])
      for (idx[0] = D.lo[0]; idx[0] <= D.hi[0]; ++idx[0]) {
        const int32_t lab = geom.label_at(idx);
        if (lab == 0 || flags[size_t(lab - 1)] != 1) continue;
        auto& ca = agg[size_t(lab - 1)];
        bool interior = true;
        std::array<long, 3> tile{0, 0, 0};
        for (int ax = 0; ax < d; ++ax) {
          if (!interior_of[size_t(idx[ax])]) interior = false;
          tile[ax] = tile_of[size_t(idx[ax])];
        }
        if (!ca.seen) {
          ca.seen = true;
          ca.tile = tile;
        } else if (tile != ca.tile) {
          ca.same_tile = false;
        }
        if (interior)
          ca.any_interior = true;
        else
          ca.all_interior = false;
      }

  DecompositionResult out;
  out.R = R;
  out.r = r;
  out.a = a;
  double meso_sum = 0;
  for (int i = 0; i < ncomp; ++i) {
    if (flags[size_t(i)] != 1) continue;
    const auto& ca = agg[size_t(i)];
    const double phi = phi_value(spec, geom.comps[size_t(i)]);
    if (ca.all_interior && ca.same_tile) {
      meso_sum += phi;
    } else if (!ca.any_interior) {
      out.A += phi;
    } else {
      // Crosses the boundary of U_R; large iff it meets two parallel
      // a-planes.
      const auto& ci = geom.comps[size_t(i)];
      bool two_planes = false;
      const double eps = 1e-9 * h;
      for (int ax = 0; ax < d && !two_planes; ++ax) {
        const double xmin = g.coord(ci.bb_lo[ax]);
        const double xmax = g.coord(ci.bb_hi[ax]);
        const long planes = long(std::floor(xmax / a + eps)) -
                            long(std::ceil(xmin / a - eps)) + 1;
        if (planes >= 2) two_planes = true;
      }
      if (two_planes)
        out.B += phi;
      else
        out.C += phi;
    }
  }

  // Mesobox values recomputed independently through the counting rule; their
  // sum must reproduce the classification bucket exactly.
  const long q = Rh / sh;
  std::array<long, 3> jt{0, 0, 0};
  const long jlo = -q / 2, jhi = q / 2 - 1;
  const long jlo1 = (d >= 2) ? jlo : 0, jhi1 = (d >= 2) ? jhi : 0;
  const long jlo2 = (d >= 3) ? jlo : 0, jhi2 = (d >= 3) ? jhi : 0;
  for (jt[2] = jlo2; jt[2] <= jhi2; ++jt[2])
    for (jt[1] = jlo1; jt[1] <= jhi1; ++jt[1])
      for (jt[0] = jlo; jt[0] <= jhi; ++jt[0]) {
        Vec3 c{0, 0, 0};
        for (int ax = 0; ax < d; ++ax) c[ax] = (jt[ax] + 0.5) * sh * h;
        const Box meso = Box::centered(g, r, c);
        out.mesobox_values.push_back(bounded_functional(geom, spec, meso));
      }
  const double meso_direct = std::accumulate(out.mesobox_values.begin(),
                                             out.mesobox_values.end(), 0.0);
  if (meso_direct != meso_sum)
    throw Error("multiscale internal inconsistency: mesobox sums disagree");

  out.total = bounded_functional(geom, spec, D);
  return out;
}

bool one_arm_event(const FieldSample& fs, double level, const Vec3& center,
                   double R_arm) {
  const GridSpec& g = fs.grid;
  FunctionalSpec spec;
  spec.level = level;
  const Box inner = Box::centered(g, 1.0, center);
  const Box outer = Box::centered(g, R_arm, center);
  if (!inner.inside_grid(g) || !outer.inside_grid(g))
    throw DomainOutsideGrid("arm annulus exceeds grid");
  const auto geom = label_components(extract_excursion(fs, spec));
  std::vector<char> inner_labels(geom.comps.size(), 0);
  std::array<int, 3> idx{0, 0, 0};
  const int d = g.d;
  const int lo2 = (d >= 3) ? inner.lo[2] : 0, hi2 = (d >= 3) ? inner.hi[2] : 0;
  const int lo1 = (d >= 2) ? inner.lo[1] : 0, hi1 = (d >= 2) ? inner.hi[1] : 0;
  for (idx[2] = lo2; idx[2] <= hi2; ++idx[2])
    for (idx[1] = lo1; idx[1] <= hi1; ++idx[1])
      for (idx[0] = inner.lo[0]; idx[0] <= inner.hi[0]; ++idx[0]) {
        const int32_t lab = geom.label_at(idx);
        if (lab > 0) inner_labels[size_t(lab - 1)] = 1;
      }
  bool hit = false;
  const int olo2 = (d >= 3) ? outer.lo[2] : 0,
            ohi2 = (d >= 3) ? outer.hi[2] : 0;
  const int olo1 = (d >= 2) ? outer.lo[1] : 0,
            ohi1 = (d >= 2) ? outer.hi[1] : 0;
  for (idx[2] = olo2; idx[2] <= ohi2 && !hit; ++idx[2])
    for (idx[1] = olo1; idx[1] <= ohi1 && !hit; ++idx[1])
      for (idx[0] = outer.lo[0]; idx[0] <= outer.hi[0] && !hit; ++idx[0]) {
        if (!on_box_shell(d, outer, idx)) continue;
        const int32_t lab = geom.label_at(idx);
        if (lab > 0 && inner_labels[size_t(lab - 1)]) hit = true;
      }
  return hit;
}

bool truncated_arm_event(const FieldSample& fs, double level, const Vec3& x,
                         double r_arm) {
  const GridSpec& g = fs.grid;
  const int d = g.d, n = g.n();
  const double h = g.h;
  for (int a = 0; a < d; ++a)
    if (std::abs(x[a]) + r_arm > 0.5 * g.extent())
      throw DomainOutsideGrid("truncated-arm ball exceeds grid");

  FunctionalSpec spec;
  spec.level = level;
  const auto bg = extract_excursion(fs, spec);
  auto dist = [&](const std::array<int, 3>& idx) {
    double s = 0;
    for (int a = 0; a < d; ++a) {
      const double v = g.coord(idx[a]) - x[a];
      s += v * v;
    }
    return std::sqrt(s);
  };
  const auto offs = neighbor_offsets(d, true);
  std::vector<char> visited(bg.cells.size(), 0);
  std::array<int, 3> idx{0, 0, 0};
  const int64_t total = int64_t(bg.cells.size());
  for (int64_t start = 0; start < total; ++start) {
    if (!bg.cells[size_t(start)] || visited[size_t(start)]) continue;
    delinearize(d, n, start, idx);
    const double ds = dist(idx);
    if (!(ds > 1.0 && ds <= 1.0 + 2.0 * h)) continue;  // seed near dB(x,1)
    // Flood the component of foreground \ B(x,1) containing this seed.
    bool reached_outer = false, touched_edge = false;
    std::deque<int64_t> queue{start};
    visited[size_t(start)] = 1;
    while (!queue.empty()) {
      const int64_t cur = queue.front();
      queue.pop_front();
      delinearize(d, n, cur, idx);
      const double dc = dist(idx);
      if (dc >= r_arm - 2.0 * h && dc <= r_arm) reached_outer = true;
      if (on_grid_edge(d, n, idx)) touched_edge = true;
      for (const auto& o : offs) {
        auto nb = idx;
        bool ok = true;
        for (int a = 0; a < d; ++a) {
          nb[a] += o[a];
          if (nb[a] < 0 || nb[a] >= n) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        const int64_t nl = linear_index(d, n, nb);
        if (visited[size_t(nl)] || !bg.cells[size_t(nl)]) continue;
        if (dist(nb) <= 1.0) continue;  // excluded ball
        visited[size_t(nl)] = 1;
        queue.push_back(nl);
      }
    }
    if (reached_outer && !touched_edge) return true;
  }
  return false;
}

double unbounded_volume(const FieldSample& fs, double level, const Box& D,
                        double min_buffer) {
  const GridSpec& g = fs.grid;
  if (g.b + 1e-9 < min_buffer)
    throw BufferTooSmall("grid buffer below declared minimum " +
                         std::to_string(min_buffer));
  FunctionalSpec spec;
  spec.level = level;
  const auto geom = label_components(extract_excursion(fs, spec));
  if (!box_in_grid(g.d, g.n(), D))
    throw DomainOutsideGrid("volume domain exceeds grid");
  // half-open cell counting (upper-face nodes skipped) so that an
  // all-foreground box of side s reports exactly s^d
  int64_t cells = 0;
  std::array<int, 3> idx{0, 0, 0};
  const int d = g.d;
  auto top = [](int lo, int hi) { return hi > lo ? hi - 1 : hi; };
  const int lo2 = (d >= 3) ? D.lo[2] : 0,
            hi2 = (d >= 3) ? top(D.lo[2], D.hi[2]) : 0;
  const int lo1 = (d >= 2) ? D.lo[1] : 0,
            hi1 = (d >= 2) ? top(D.lo[1], D.hi[1]) : 0;
  for (idx[2] = lo2; idx[2] <= hi2; ++idx[2])
    for (idx[1] = lo1; idx[1] <= hi1; ++idx[1])
      for (idx[0] = D.lo[0]; idx[0] <= top(D.lo[0], D.hi[0]); ++idx[0]) {
        const int32_t lab = geom.label_at(idx);
        if (lab > 0 && geom.comps[size_t(lab - 1)].touches_grid_edge)
          ++cells;
      }
  return double(cells) * std::pow(g.h, d);
}

double evaluate_functional(const FieldSample& fs, const FunctionalSpec& spec,
                           const Box& D) {
  const auto bg = extract_excursion(fs, spec);
  if (spec.phi == PhiKind::Euler)
    return double(euler_characteristic_cubical(bg, D));
  return bounded_functional(label_components(bg), spec, D);
}

namespace {
double eval_perturbed(const FieldSample& fs, const FunctionalSpec& spec,
                      const Box& D, const Vec3& x, double eps, double delta,
                      int sign) {
  FieldSample pert = fs;
  const GridSpec& g = fs.grid;
  const int d = g.d;
  Box support;
  for (int a = 0; a < d; ++a) {
    support.lo[a] = std::max(0, g.index_of(x[a] - eps));
    support.hi[a] = std::min(g.n() - 1, g.index_of(x[a] + eps));
  }
  for_each_node(g, support, [&](const std::array<int, 3>& idx) {
    double r2 = 0;
    for (int a = 0; a < d; ++a) {
      const double v = g.coord(idx[a]) - x[a];
      r2 += v * v;
    }
    const double q = r2 / (eps * eps);
    if (q >= 1.0) return;
    const double rho = delta * std::exp(1.0 - 1.0 / (1.0 - q));
    pert.at(idx) += sign * rho;
  });
  return evaluate_functional(pert, spec, D);
}
}  // namespace

TopDerivResult topological_derivative(const FieldSample& fs,
                                      const FunctionalSpec& spec, const Box& D,
                                      const Vec3& x, double eps,
                                      double delta) {
  TopDerivResult out;
  out.value = eval_perturbed(fs, spec, D, x, eps, delta, +1) -
              eval_perturbed(fs, spec, D, x, eps, delta, -1);
  const double refined = eval_perturbed(fs, spec, D, x, 0.5 * eps,
                                        0.5 * delta, +1) -
                         eval_perturbed(fs, spec, D, x, 0.5 * eps,
                                        0.5 * delta, -1);
  out.refinement_stable = (refined == out.value);
  return out;
}

CriticalCensus critical_census(const FieldSample& fs, const Box& D) {
  const int d = fs.grid.d, n = fs.grid.n();
  if (!box_in_grid(d, n, D))
    throw DomainOutsideGrid("census domain exceeds grid");
  CriticalCensus census;
  std::array<int, 3> sig{0, 0, 0};
  const int s1 = 3, s2 = (d >= 2) ? 3 : 1, s3 = (d >= 3) ? 3 : 1;
  for (sig[2] = 0; sig[2] < s3; ++sig[2])
    for (sig[1] = 0; sig[1] < s2; ++sig[1])
      for (sig[0] = 0; sig[0] < s1; ++sig[0]) {
        Box range;
        int kfree = 0;
        bool empty = false;
        for (int a = 0; a < d; ++a) {
          if (sig[a] == 0) {
            range.lo[a] = D.lo[a] + 1;
            range.hi[a] = D.hi[a] - 1;
            ++kfree;
          } else {
            range.lo[a] = range.hi[a] = (sig[a] == 1) ? D.lo[a] : D.hi[a];
          }
          if (range.lo[a] > range.hi[a]) empty = true;
        }
        if (empty) continue;
        std::array<int, 3> idx{0, 0, 0};
        const int lo2 = (d >= 3) ? range.lo[2] : 0,
                  hi2 = (d >= 3) ? range.hi[2] : 0;
        const int lo1 = (d >= 2) ? range.lo[1] : 0,
                  hi1 = (d >= 2) ? range.hi[1] : 0;
        for (idx[2] = lo2; idx[2] <= hi2; ++idx[2])
          for (idx[1] = lo1; idx[1] <= hi1; ++idx[1])
            for (idx[0] = range.lo[0]; idx[0] <= range.hi[0]; ++idx[0]) {
              const double v = fs.at(idx);
              bool critical = true, ambiguous = false;
              int down = 0;
              for (int a = 0; a < d && critical; ++a) {
                if (sig[a] != 0) continue;
                auto p = idx, q = idx;
                p[a] += 1;
                q[a] -= 1;
                const double dp = fs.at(p) - v, dq = fs.at(q) - v;
                if (dp == 0 || dq == 0) {
                  ambiguous = true;
                  break;
                }
                if (dp < 0 && dq < 0)
                  ++down;
                else if (!(dp > 0 && dq > 0))
                  critical = false;
              }
              if (!critical && !ambiguous) continue;
              CriticalCell cell;
              cell.idx = idx;
              cell.stratum_dim = kfree;
              cell.down_axes = down;
              cell.value = v;
              if (ambiguous)
                cell.type = CritType::Ambiguous;
              else if (kfree == 0 || down == kfree)
                cell.type = CritType::Max;
              else if (down == 0)
                cell.type = CritType::Min;
              else
                cell.type = CritType::Saddle;
              census.cells.push_back(cell);
            }
      }
  return census;
}

std::string geometry_csv(const ExcursionGeometry& geom) {
  std::string out = "component_id,cells,bbox,touches_boundary,holes\r\n";
  char buf[160];
  for (size_t i = 0; i < geom.comps.size(); ++i) {
    const auto& c = geom.comps[i];
    std::string bbox;
    for (int a = 0; a < geom.d; ++a) {
      char piece[48];
      std::snprintf(piece, sizeof piece, "%s%d:%d", a ? " " : "", c.bb_lo[a],
                    c.bb_hi[a]);
      bbox += piece;
    }
    std::snprintf(buf, sizeof buf, "%zu,%lld,\"%s\",%d,%d\r\n", i + 1,
                  (long long)c.cells, bbox.c_str(), c.touches_grid_edge ? 1 : 0,
                  c.holes);
    out += buf;
  }
  return out;
}

}  // namespace exclab
