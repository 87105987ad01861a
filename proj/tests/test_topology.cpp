#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "exclab/errors.hpp"
#include "exclab/sampler.hpp"
#include "exclab/topology.hpp"

using namespace exclab;

namespace {

CovarianceModel bf(int d) {
  CovarianceModel m;
  m.d = d;
  return m;
}

FieldSample make_field(const GridSpec& g,
                       const std::function<double(double, double)>& fn) {
  FieldSample fs;
  fs.grid = g;
  fs.values.resize(size_t(g.ncells()));
  const int n = g.n();
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      fs.values[size_t(int64_t(j) * n + i)] = fn(g.coord(i), g.coord(j));
  return fs;
}

FieldSample const_field(const GridSpec& g, double v) {
  return make_field(g, [v](double, double) { return v; });
}

BinaryGrid grid2(int n, const std::vector<uint8_t>& cells) {
  BinaryGrid bg;
  bg.d = 2;
  bg.n = n;
  bg.cells = cells;
  return bg;
}

// 5x5 grid: a 3x3 ring of foreground around one background cell
BinaryGrid ring5() {
  BinaryGrid bg;
  bg.d = 2;
  bg.n = 5;
  bg.cells.assign(25, 0);
  for (int j = 1; j <= 3; ++j)
    for (int i = 1; i <= 3; ++i)
      if (i != 2 || j != 2) bg.cells[size_t(j * 5 + i)] = 1;
  return bg;
}

bool same_partition(const ExcursionGeometry& a, const ExcursionGeometry& b) {
  if (a.comps.size() != b.comps.size() || a.labels.size() != b.labels.size())
    return false;
  std::map<int32_t, int32_t> fwd;
  for (size_t i = 0; i < a.labels.size(); ++i) {
    const int32_t la = a.labels[i], lb = b.labels[i];
    if ((la == 0) != (lb == 0)) return false;
    if (la == 0) continue;
    const auto it = fwd.find(la);
    if (it == fwd.end()) fwd[la] = lb;
    else if (it->second != lb) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("excursion extraction thresholds with the closed convention") {
  const GridSpec g{2, 4.0, 0.5, 0.0};
  FunctionalSpec spec;
  spec.level = 1.0;
  const BinaryGrid above = extract_excursion(const_field(g, 2.0), spec);
  const BinaryGrid below = extract_excursion(const_field(g, 0.0), spec);
  const BinaryGrid tied = extract_excursion(const_field(g, 1.0), spec);
  for (uint8_t c : above.cells) CHECK(c == 1);
  for (uint8_t c : below.cells) CHECK(c == 0);
  for (uint8_t c : tied.cells) CHECK(c == 1);  // {f >= l} is closed
}

TEST_CASE("level sets are thin shells of half-width h/2") {
  const GridSpec g{2, 4.0, 0.5, 0.0};
  FunctionalSpec spec;
  spec.set_type = SetType::Level;
  spec.level = 1.0;
  const BinaryGrid in = extract_excursion(const_field(g, 1.0 + 0.4 * g.h), spec);
  const BinaryGrid out = extract_excursion(const_field(g, 1.0 + 0.6 * g.h), spec);
  for (uint8_t c : in.cells) CHECK(c == 1);
  for (uint8_t c : out.cells) CHECK(c == 0);
}

TEST_CASE("labeling connectivity conventions") {
  const BinaryGrid diag = grid2(2, {1, 0, 0, 1});
  CHECK(label_components(diag, true).comps.size() == 1);   // 8-connected
  CHECK(label_components(diag, false).comps.size() == 2);  // 4-connected
  const auto ring = label_components(ring5());
  REQUIRE(ring.comps.size() == 1);
  CHECK(ring.comps[0].holes == 1);
  CHECK(ring.comps[0].cells == 8);
  CHECK(!ring.comps[0].touches_grid_edge);
}

TEST_CASE("union-find agrees with the flood-fill reference") {
  const GridSpec g{2, 16.0, 0.5, 0.0};
  const CirculantSampler s(bf(2), g);
  FunctionalSpec spec;
  for (int rep = 0; rep < 30; ++rep) {
    const BinaryGrid bg = extract_excursion(s.sample(31, uint64_t(rep)), spec);
    const auto a = label_components(bg);
    const auto b = label_components_reference(bg);
    CHECK(same_partition(a, b));
    // per-component summaries must match once labels are aligned
    std::map<int64_t, int> hist_a, hist_b;
    for (const auto& c : a.comps) ++hist_a[c.cells * 100 + c.holes];
    for (const auto& c : b.comps) ++hist_b[c.cells * 100 + c.holes];
    CHECK(hist_a == hist_b);
  }
}

TEST_CASE("component counting excludes boundary-touching components") {
  BinaryGrid empty = grid2(5, std::vector<uint8_t>(25, 0));
  const Box D{{0, 0, 0}, {4, 4, 0}};
  CHECK(component_count(label_components(empty), D) == 0);

  // interior blob
  BinaryGrid blob = grid2(5, std::vector<uint8_t>(25, 0));
  blob.cells[size_t(2 * 5 + 2)] = 1;
  blob.cells[size_t(2 * 5 + 3)] = 1;
  CHECK(component_count(label_components(blob), D) == 1);

  // blob crossing the shell of D
  BinaryGrid cross = grid2(5, std::vector<uint8_t>(25, 0));
  cross.cells[size_t(0 * 5 + 2)] = 1;
  cross.cells[size_t(1 * 5 + 2)] = 1;
  CHECK(component_count(label_components(cross), D) == 0);

  const Box bad{{0, 0, 0}, {9, 9, 0}};
  CHECK_THROWS_AS(component_count(label_components(blob), bad),
                  DomainOutsideGrid);
}

TEST_CASE("bounded functional with hole-indicator weight") {
  const Box D{{0, 0, 0}, {4, 4, 0}};
  FunctionalSpec holes;
  holes.phi = PhiKind::HoleIndicator;
  FunctionalSpec count;
  CHECK(bounded_functional(label_components(ring5()), holes, D) == 1.0);

  BinaryGrid solid = grid2(5, std::vector<uint8_t>(25, 0));
  for (int j = 1; j <= 3; ++j)
    for (int i = 1; i <= 3; ++i) solid.cells[size_t(j * 5 + i)] = 1;
  CHECK(bounded_functional(label_components(solid), holes, D) == 0.0);
  CHECK(bounded_functional(label_components(solid), count, D) ==
        double(component_count(label_components(solid), D)));
}

TEST_CASE("bounded functional equals an independent flood-fill recount") {
  const GridSpec g{2, 16.0, 0.5, 0.0};
  const CirculantSampler s(bf(2), g);
  FunctionalSpec spec;
  const Box D = Box::centered(g, 12.0);
  for (int rep = 0; rep < 20; ++rep) {
    const BinaryGrid bg = extract_excursion(s.sample(32, uint64_t(rep)), spec);
    CHECK(bounded_functional(label_components(bg), spec, D) ==
          bounded_functional(label_components_reference(bg), spec, D));
  }
}

TEST_CASE("cubical Euler characteristic on known sets") {
  const Box D{{0, 0, 0}, {4, 4, 0}};
  BinaryGrid one = grid2(5, std::vector<uint8_t>(25, 0));
  one.cells[size_t(2 * 5 + 2)] = 1;
  CHECK(euler_characteristic_cubical(one, D) == 1);
  CHECK(euler_characteristic_cubical(ring5(), D) == 0);  // 1 comp - 1 hole

  BinaryGrid two = grid2(5, std::vector<uint8_t>(25, 0));
  two.cells[size_t(0)] = 1;
  two.cells[size_t(4 * 5 + 4)] = 1;
  CHECK(euler_characteristic_cubical(two, D) == 2);

  // an all-foreground periodic grid is a torus
  BinaryGrid full = grid2(8, std::vector<uint8_t>(64, 1));
  CHECK(euler_characteristic_cubical(full, D, true) == 0);

  CHECK_THROWS_AS(euler_characteristic_cubical(one, Box{{0, 0, 0}, {9, 9, 0}}),
                  DomainOutsideGrid);
}

TEST_CASE("cubical Euler characteristic is additive across a shared plane") {
  const GridSpec g{2, 16.0, 0.5, 0.0};
  const CirculantSampler s(bf(2), g);
  FunctionalSpec spec;
  const int n = g.n(), mid = n / 2;
  const Box d1{{2, 2, 0}, {mid, n - 3, 0}};
  const Box d2{{mid, 2, 0}, {n - 3, n - 3, 0}};
  const Box di{{mid, 2, 0}, {mid, n - 3, 0}};
  const Box du{{2, 2, 0}, {n - 3, n - 3, 0}};
  for (int rep = 0; rep < 20; ++rep) {
    const BinaryGrid bg = extract_excursion(s.sample(33, uint64_t(rep)), spec);
    CHECK(euler_characteristic_cubical(bg, du) ==
          euler_characteristic_cubical(bg, d1) +
              euler_characteristic_cubical(bg, d2) -
              euler_characteristic_cubical(bg, di));
  }
}

TEST_CASE("Morse-theoretic Euler characteristic on smooth model fields") {
  const GridSpec g{2, 16.0, 0.5, 0.0};
  const Box D = Box::centered(g, 12.0);
  const FieldSample cap =
      make_field(g, [](double x, double y) { return 2.0 * std::exp(-x * x - y * y); });
  CHECK(euler_characteristic_morse(cap, 1.0, D) == 1);

  const FieldSample caps = make_field(g, [](double x, double y) {
    return std::exp(-(x - 2) * (x - 2) - y * y) +
           std::exp(-(x + 2) * (x + 2) - y * y);
  });
  CHECK(euler_characteristic_morse(caps, 0.5, D) == 2);
  FunctionalSpec spec;
  spec.level = 0.5;
  CHECK(euler_characteristic_cubical(extract_excursion(caps, spec), D) == 2);

  // level exactly at the summit value collides with a critical value
  CHECK_THROWS_AS(euler_characteristic_morse(cap, 2.0, D),
                  LevelAtCriticalValue);
}

TEST_CASE("Morse and cubical Euler numbers agree up to a boundary term") {
  const GridSpec g{2, 64.0, 0.5, 0.0};
  const CirculantSampler s(bf(2), g);
  const Box D = Box::centered(g, 32.0);
  const int64_t side = D.hi[0] - D.lo[0] + 1;
  FunctionalSpec spec;
  for (int rep = 0; rep < 10; ++rep) {
    const FieldSample fs = s.sample(34, uint64_t(rep));
    const int64_t cm = euler_characteristic_morse(fs, 0.0, D);
    const int64_t cc =
        euler_characteristic_cubical(extract_excursion(fs, spec), D);
    CHECK(std::llabs(cm - cc) <= 4 * side);
  }
}

TEST_CASE("a-plane splitting partitions the counted components") {
  const GridSpec g{2, 8.0, 0.5, 0.0};
  FieldSample fs = const_field(g, -1.0);
  // small: one node off the integer planes; big: a row crossing x=0,1,2
  fs.at({g.index_of(-1.75), g.index_of(-1.75), 0}) = 1.0;
  for (double x = 0.0; x <= 2.0; x += 0.5)
    fs.at({g.index_of(x), g.index_of(1.75), 0}) = 1.0;
  FunctionalSpec spec;
  const auto geom = label_components(extract_excursion(fs, spec));
  const Box D = Box::centered(g, 7.0);
  const auto [big, small] = split_by_a_planes(geom, g, 1.0, D);
  CHECK(big.size() == 1);
  CHECK(small.size() == 1);
  CHECK(int64_t(big.size() + small.size()) == component_count(geom, D));
  CHECK_THROWS_AS(split_by_a_planes(geom, g, 0.5, D), BadScale);  // a < 2h
}

TEST_CASE("multiscale decomposition identity") {
  FunctionalSpec spec;
  const GridSpec g{2, 20.0, 0.5, 0.0};
  const DecompositionResult empty =
      multiscale_decompose(const_field(g, -1.0), spec, 16.0, 4.0, 1.0);
  CHECK(empty.total == 0.0);
  CHECK(empty.A == 0.0);
  CHECK(empty.B == 0.0);
  CHECK(empty.C == 0.0);
  for (double v : empty.mesobox_values) CHECK(v == 0.0);

  const CirculantSampler s(bf(2), g);
  for (int rep = 0; rep < 30; ++rep) {
    const FieldSample fs = s.sample(35, uint64_t(rep));
    const DecompositionResult r = multiscale_decompose(fs, spec, 16.0, 4.0, 1.0);
    double meso = 0;
    for (double v : r.mesobox_values) meso += v;
    CHECK(r.total == meso + r.A + r.B + r.C);  // exact, no tolerance
  }
  // R/(r+4a) = 3 is odd
  CHECK_THROWS_AS(multiscale_decompose(const_field(g, -1.0), spec, 24.0, 4.0, 1.0),
                  BadScale);
}

TEST_CASE("arm events") {
  const GridSpec g{2, 20.0, 0.5, 0.0};
  const FieldSample fg = const_field(g, 1.0);
  const FieldSample bgf = const_field(g, -1.0);
  CHECK(one_arm_event(fg, 0.0, {0, 0, 0}, 8.0));
  CHECK(!truncated_arm_event(fg, 0.0, {0, 0, 0}, 5.0));  // reaches the edge
  CHECK(!one_arm_event(bgf, 0.0, {0, 0, 0}, 8.0));
  CHECK(!truncated_arm_event(bgf, 0.0, {0, 0, 0}, 5.0));

  // a sealed corridor from just outside B(0,1) out to radius 5
  FieldSample corridor = const_field(g, -1.0);
  for (double x = 1.0; x <= 5.0; x += 0.5)
    corridor.at({g.index_of(x), g.index_of(0.0), 0}) = 1.0;
  CHECK(truncated_arm_event(corridor, 0.0, {0, 0, 0}, 5.0));
  CHECK_THROWS_AS(one_arm_event(fg, 0.0, {0, 0, 0}, 40.0), DomainOutsideGrid);
}

TEST_CASE("unbounded-component volume proxy") {
  const GridSpec g{2, 8.0, 0.5, 6.0};
  const Box D = Box::centered(g, 8.0);
  // all-foreground gives exactly |D| (half-open cell counting)
  CHECK(unbounded_volume(const_field(g, 1.0), 0.0, D) ==
        doctest::Approx(64.0));
  CHECK(unbounded_volume(const_field(g, -1.0), 0.0, D) == 0.0);

  FieldSample blob = const_field(g, -1.0);
  for (double x = -1.0; x <= 1.0; x += 0.5)
    for (double y = -1.0; y <= 1.0; y += 0.5)
      blob.at({g.index_of(x), g.index_of(y), 0}) = 1.0;
  CHECK(unbounded_volume(blob, 0.0, D) == 0.0);  // bounded components excluded

  const GridSpec thin{2, 8.0, 0.5, 2.0};
  CHECK_THROWS_AS(unbounded_volume(const_field(thin, 1.0), 0.0,
                                   Box::centered(thin, 8.0)),
                  BufferTooSmall);
}

TEST_CASE("topological derivative at model critical points") {
  const GridSpec g{2, 16.0, 0.5, 0.0};
  const Box D = Box::centered(g, 12.0);
  FunctionalSpec count;

  // local max exactly at the level: a component is born
  const FieldSample peak =
      make_field(g, [](double x, double y) { return -(x * x + y * y); });
  const TopDerivResult born =
      topological_derivative(peak, count, D, {0, 0, 0}, 0.5, 0.01);
  CHECK(born.value == 1.0);
  CHECK(born.refinement_stable);

  // saddle at the level joining two caps: components merge
  const FieldSample caps = make_field(g, [](double x, double y) {
    return std::exp(-(x - 2) * (x - 2) - y * y) +
           std::exp(-(x + 2) * (x + 2) - y * y);
  });
  FunctionalSpec at_saddle;
  at_saddle.level = 2.0 * std::exp(-4.0);
  const TopDerivResult merge =
      topological_derivative(caps, at_saddle, D, {0, 0, 0}, 0.5, 0.01);
  CHECK(merge.value == -1.0);
  CHECK(merge.refinement_stable);

  // local min at the level inside a component: count unchanged, hole born
  const FieldSample dimple = make_field(g, [](double x, double y) {
    const double r2 = x * x + y * y;
    return std::exp(-r2 / 8.0) - 0.9 * std::exp(-r2) - 0.1;
  });
  const TopDerivResult fill =
      topological_derivative(dimple, count, D, {0, 0, 0}, 0.5, 0.01);
  CHECK(fill.value == 0.0);
  CHECK(fill.refinement_stable);
  FunctionalSpec holes;
  holes.phi = PhiKind::HoleIndicator;
  const TopDerivResult hole =
      topological_derivative(dimple, holes, D, {0, 0, 0}, 0.5, 0.01);
  CHECK(hole.value == -1.0);
}

TEST_CASE("critical census on model fields and the pathwise bound") {
  const GridSpec g{2, 16.0, 0.5, 0.0};
  const Box D = Box::centered(g, 12.0);
  const FieldSample ramp =
      make_field(g, [](double x, double y) { return 0.7 * x + 0.3 * y; });
  int interior = 0;
  for (const auto& c : critical_census(ramp, D).cells)
    if (c.stratum_dim == 2) ++interior;
  CHECK(interior == 0);

  const FieldSample cap =
      make_field(g, [](double x, double y) { return 2.0 * std::exp(-x * x - y * y); });
  int maxima = 0;
  interior = 0;
  for (const auto& c : critical_census(cap, D).cells) {
    if (c.stratum_dim != 2) continue;
    ++interior;
    if (c.type == CritType::Max) ++maxima;
  }
  CHECK(interior == 1);
  CHECK(maxima == 1);

  // |Phi| <= ||Phi||_Lip * (stratified critical count), pathwise
  const CirculantSampler s(bf(2), g);
  FunctionalSpec spec;
  for (int rep = 0; rep < 100; ++rep) {
    const FieldSample fs = s.sample(36, uint64_t(rep));
    const double phi = evaluate_functional(fs, spec, D);
    const double bound =
        spec.lip_norm() * double(critical_census(fs, D).total());
    CHECK(std::abs(phi) <= bound);
  }
}

TEST_CASE("geometry csv export") {
  const auto geom = label_components(ring5());
  const std::string csv = geometry_csv(geom);
  CHECK(csv.find("component_id") != std::string::npos);
  CHECK(csv.find("holes") != std::string::npos);
  // header plus one component row
  int lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 2);
}
