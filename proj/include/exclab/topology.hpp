#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exclab/grid.hpp"

namespace exclab {

enum class SetType { Excursion, Level };

// Component weight phi. Count is phi == 1; HoleIndicator is 1 iff the
// component has exactly one hole (d=2); Zero is the null functional; Euler
// switches the functional to the cubical Euler characteristic of the set.
enum class PhiKind { Count, HoleIndicator, Zero, Euler };

struct FunctionalSpec {
  SetType set_type = SetType::Excursion;
  double level = 0.0;
  PhiKind phi = PhiKind::Count;

  double phi_sup() const {
    switch (phi) {
      case PhiKind::Zero: return 0.0;
      default: return 1.0;
    }
  }
  // Lipschitz norm of the functional: 3 sup|phi| for component sums, 1 for
  // the Euler characteristic.
  double lip_norm() const {
    return phi == PhiKind::Euler ? 1.0 : 3.0 * phi_sup();
  }
};

struct BinaryGrid {
  int d = 2;
  int n = 0;
  std::vector<uint8_t> cells;  // row-major, axis 0 fastest

  int64_t index(const std::array<int, 3>& idx) const {
    int64_t r = idx[d - 1];
    for (int a = d - 2; a >= 0; --a) r = r * n + idx[a];
    return r;
  }
  bool at(const std::array<int, 3>& idx) const {
    return cells[size_t(index(idx))] != 0;
  }
};

struct ComponentInfo {
  int64_t cells = 0;
  std::array<int, 3> bb_lo{0, 0, 0};
  std::array<int, 3> bb_hi{0, 0, 0};
  bool touches_grid_edge = false;
  int holes = 0;  // d=2 only
};

struct ExcursionGeometry {
  int d = 2;
  int n = 0;
  std::vector<int32_t> labels;  // 0 = background, components are 1-based
  std::vector<ComponentInfo> comps;

  int32_t label_at(const std::array<int, 3>& idx) const {
    int64_t r = idx[d - 1];
    for (int a = d - 2; a >= 0; --a) r = r * n + idx[a];
    return labels[size_t(r)];
  }
};

struct DecompositionResult {
  double R = 0, r = 0, a = 0;
  std::vector<double> mesobox_values;  // Phi(x + Lambda_r), x in chi_R
  double A = 0, B = 0, C = 0;
  double total = 0;  // Phi(Lambda_R)
};

enum class CritType { Min, Max, Saddle, Ambiguous };

struct CriticalCell {
  std::array<int, 3> idx{0, 0, 0};
  int stratum_dim = 0;   // dimension of the box stratum the cell lies on
  int down_axes = 0;     // in-stratum axes with both neighbors below
  CritType type = CritType::Saddle;
  double value = 0.0;
};

struct CriticalCensus {
  std::vector<CriticalCell> cells;
  int64_t total() const { return int64_t(cells.size()); }
};

BinaryGrid extract_excursion(const FieldSample& fs, const FunctionalSpec& spec);

// Union-find labeling. foreground_max_conn selects 8/26-connectivity for the
// foreground (the default smooth-set convention); background components (for
// d=2 hole counts) always use 4-connectivity.
ExcursionGeometry label_components(const BinaryGrid& bg,
                                   bool foreground_max_conn = true);
// Serial BFS flood-fill reference; must agree with label_components up to
// label permutation. Kept as the test oracle and benchmark baseline.
ExcursionGeometry label_components_reference(const BinaryGrid& bg,
                                             bool foreground_max_conn = true);

// Components with a cell in D but none on the 1-cell-thick discrete shell
// of D.
int64_t component_count(const ExcursionGeometry& geom, const Box& D);
double bounded_functional(const ExcursionGeometry& geom,
                          const FunctionalSpec& spec, const Box& D);
// Same weight sum with boundary-crossing components kept. Together with the
// boundary-excluded sum this sandwiches the infinite-volume density: the
// excluded sum undercounts and the inclusive sum overcounts by exactly the
// components meeting the shell of D.
double inclusive_functional(const ExcursionGeometry& geom,
                            const FunctionalSpec& spec, const Box& D);

// Alternating cell count of the cubical complex spanned by foreground nodes
// clipped to D; periodic wraps adjacency around the full grid (D ignored).
int64_t euler_characteristic_cubical(const BinaryGrid& bg, const Box& D,
                                     bool periodic = false);
int64_t euler_characteristic_morse(const FieldSample& fs, double level,
                                   const Box& D);

// Counted components split by whether they intersect at least two parallel
// a-planes (hyperplanes through a*Z per axis). Returns (big ids, small ids).
std::pair<std::vector<int32_t>, std::vector<int32_t>> split_by_a_planes(
    const ExcursionGeometry& geom, const GridSpec& grid, double a,
    const Box& D);

DecompositionResult multiscale_decompose(const FieldSample& fs,
                                         const FunctionalSpec& spec, double R,
                                         double r, double a);

bool one_arm_event(const FieldSample& fs, double level, const Vec3& center,
                   double R_arm);
bool truncated_arm_event(const FieldSample& fs, double level, const Vec3& x,
                         double r_arm);

double unbounded_volume(const FieldSample& fs, double level, const Box& D,
                        double min_buffer = 6.0);

// Phi(D, f): component-sum functionals use boundary-excluded counting; the
// Euler mode is chi_cubical of the excursion set clipped to D.
double evaluate_functional(const FieldSample& fs, const FunctionalSpec& spec,
                           const Box& D);

struct TopDerivResult {
  double value = 0.0;
  bool refinement_stable = true;  // equal under (eps, delta) -> halved
};

// Phi(D, f + rho) - Phi(D, f - rho) with rho a smooth bump of radius eps and
// height delta at x.
TopDerivResult topological_derivative(const FieldSample& fs,
                                      const FunctionalSpec& spec, const Box& D,
                                      const Vec3& x, double eps, double delta);

CriticalCensus critical_census(const FieldSample& fs, const Box& D);

// CSV export: component_id, cells, bbox, touches_boundary, holes.
std::string geometry_csv(const ExcursionGeometry& geom);

}  // namespace exclab
