#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "exclab/errors.hpp"
#include "exclab/rng.hpp"
#include "exclab/stats.hpp"

using namespace exclab;

namespace {

CovarianceModel bf(int d) {
  CovarianceModel m;
  m.d = d;
  return m;
}

std::vector<double> normal_draws(int n, uint64_t seed, uint64_t stream) {
  const CounterRng rng(seed, stream, RngRole::Scratch);
  std::vector<double> v(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; i += 2) {
    const auto z = rng.normal2(uint64_t(i));
    v[size_t(i)] = z[0];
    if (i + 1 < n) v[size_t(i + 1)] = z[1];
  }
  return v;
}

// O(N^2) oracle: evaluate both one-sided gaps at every jump by recounting
// the whole sample for each candidate point.
double dkol_brute(const std::vector<double>& xs,
                  const std::function<double(double)>& cdf) {
  const double N = double(xs.size());
  double best = 0;
  for (double x : xs) {
    double le = 0, lt = 0;
    for (double y : xs) {
      if (y <= x) ++le;
      if (y < x) ++lt;
    }
    best = std::max(best, std::abs(le / N - cdf(x)));
    best = std::max(best, std::abs(cdf(x) - lt / N));
  }
  return best;
}

}  // namespace

TEST_CASE("kolmogorov distance: known values and quantile construction") {
  const auto F = [](double x) { return normal_cdf(x); };
  CHECK(kolmogorov_distance(EmpiricalDistribution::from({0.0}), F) ==
        doctest::Approx(0.5).epsilon(1e-14));

  // quantile samples at (i - 0.5)/N sit inside a half-step band
  const int N = 40;
  std::vector<double> q(static_cast<size_t>(N), 0.0);
  for (int i = 0; i < N; ++i) {
    const double p = (i + 0.5) / N;
    double lo = -10, hi = 10;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    q[size_t(i)] = 0.5 * (lo + hi);
  }
  CHECK(kolmogorov_distance(EmpiricalDistribution::from(q), F) <=
        0.5 / N + 1e-12);
}

TEST_CASE("kolmogorov distance equals the quadratic brute force") {
  const auto F = [](double x) { return normal_cdf(x); };
  for (uint64_t trial = 0; trial < 20; ++trial) {
    const auto xs = normal_draws(37, 5, trial);
    const double fast =
        kolmogorov_distance(EmpiricalDistribution::from(xs), F);
    CHECK(fast == doctest::Approx(dkol_brute(xs, F)).epsilon(1e-14));
    CHECK(fast >= 0.0);
    CHECK(fast <= 1.0);
  }
}

TEST_CASE("normal samples stay below the KS 99.9% band") {
  const int N = 1000;
  const double band = 1.95 / std::sqrt(double(N));
  int ok = 0;
  for (uint64_t trial = 0; trial < 100; ++trial) {
    const auto xs = normal_draws(N, 6, trial);
    if (kolmogorov_distance(EmpiricalDistribution::from(xs),
                            [](double x) { return normal_cdf(x); }) < band)
      ++ok;
  }
  CHECK(ok >= 99);
}

TEST_CASE("interval helpers") {
  const Ci w = wilson_ci(50, 100);
  CHECK(w.lo < 0.5);
  CHECK(w.hi > 0.5);
  CHECK(w.lo > 0.39);
  CHECK(w.hi < 0.61);

  const auto xs = normal_draws(400, 8, 0);
  const double v = sample_variance(xs);
  const Ci vc = variance_ci(xs);
  CHECK(vc.lo < v);
  CHECK(vc.hi > v);
  CHECK(vc.lo > 0.0);
}

TEST_CASE("gauss-hermite quadrature moments") {
  std::vector<double> x, w;
  gauss_hermite(64, x, w);
  double s0 = 0, s2 = 0, sabs = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    s0 += w[i];
    s2 += w[i] * x[i] * x[i];
    sabs += w[i] * std::abs(x[i]);
  }
  const double spi = std::sqrt(M_PI);
  CHECK(s0 == doctest::Approx(spi).epsilon(1e-12));
  CHECK(s2 == doctest::Approx(0.5 * spi).epsilon(1e-12));
  // E|Z| = sqrt(2/pi) after z = sqrt(2) x; |x| is not smooth at 0, so the
  // quadrature only converges algebraically
  CHECK(sabs * std::sqrt(2.0) / spi ==
        doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.01));
}

TEST_CASE("lln curve: empty-excursion limit and determinism") {
  const CovarianceModel m = bf(2);
  FunctionalSpec spec;
  spec.level = 6.0;
  const std::vector<double> Rs{8.0, 16.0};
  const auto a = lln_curve(m, spec, Rs, 50, 11, 0.5);
  REQUIRE(a.size() == 2);
  for (const auto& row : a) CHECK(row.value < 1e-4);
  const auto b = lln_curve(m, spec, Rs, 50, 11, 0.5);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].value == b[i].value);
    CHECK(a[i].ci.lo == b[i].ci.lo);
  }
  // worker invariance
  const auto c = lln_curve(m, spec, Rs, 50, 11, 0.5, 1);
  const auto e = lln_curve(m, spec, Rs, 50, 11, 0.5, 4);
  for (size_t i = 0; i < c.size(); ++i) CHECK(c[i].value == e[i].value);
}

TEST_CASE("variance curve: null functional and batch consistency") {
  const CovarianceModel m = bf(2);
  FunctionalSpec zero;
  zero.phi = PhiKind::Zero;
  const auto z = variance_curve(m, zero, {12.0}, 100, 21, 0.5);
  REQUIRE(z.size() == 1);
  CHECK(z[0].value == 0.0);

  FunctionalSpec count;
  const auto b1 = variance_curve(m, count, {12.0}, 150, 22, 0.5);
  const auto b2 = variance_curve(m, count, {12.0}, 150, 23, 0.5);
  CHECK(b1[0].ci.lo <= b2[0].ci.hi);
  CHECK(b2[0].ci.lo <= b1[0].ci.hi);
}

TEST_CASE("clt report: null calibration on exact normal input") {
  const int d = 2, N = 2000;
  SampleMatrix sm;
  sm.Rs = {8.0, 16.0, 32.0};
  for (size_t ri = 0; ri < sm.Rs.size(); ++ri) {
    const double scale = std::pow(sm.Rs[ri], 0.5 * d);
    auto z = normal_draws(N, 31, ri);
    for (double& v : z) v *= scale;
    sm.values.push_back(z);
  }
  const CltReport rep = clt_report_from(sm, d, 77);
  CHECK(rep.sigma_hat == doctest::Approx(1.0).epsilon(0.1));
  const double band = 1.95 / std::sqrt(double(N));
  for (const auto& row : rep.rows) {
    CHECK(row.d_kol < band);
    // bootstrap percentile interval: ordered and in scale (the resampled
    // statistic is biased up, so it need not cover the point estimate)
    CHECK(row.d_kol_ci.lo <= row.d_kol_ci.hi);
    CHECK(row.d_kol_ci.hi < 2.0 * band);
  }
}

TEST_CASE("clt standardization is scale invariant") {
  const int d = 2, N = 500;
  SampleMatrix sm;
  sm.Rs = {8.0, 16.0, 32.0};
  for (size_t ri = 0; ri < sm.Rs.size(); ++ri) {
    auto z = normal_draws(N, 32, ri);
    for (double& v : z) v = v * std::pow(sm.Rs[ri], 0.5 * d) + 3.0;
    sm.values.push_back(z);
  }
  SampleMatrix scaled = sm;
  for (auto& col : scaled.values)
    for (double& v : col) v *= 4.0;  // power of two: exact fp scaling
  const CltReport a = clt_report_from(sm, d, 78);
  const CltReport b = clt_report_from(scaled, d, 78);
  CHECK(b.sigma_hat == 4.0 * a.sigma_hat);
  for (size_t i = 0; i < a.rows.size(); ++i)
    CHECK(a.rows[i].d_kol == b.rows[i].d_kol);
  CHECK(a.eta_hat == b.eta_hat);
}

TEST_CASE("clt report rejects degenerate variance") {
  SampleMatrix sm;
  sm.Rs = {8.0, 16.0};
  sm.values = {std::vector<double>(100, 2.0), std::vector<double>(100, 2.0)};
  CHECK_THROWS_AS(clt_report_from(sm, 2, 1), DegenerateVariance);
}

TEST_CASE("asclt statistic: constant map is reproduced exactly") {
  const CovarianceModel m = bf(2);
  FunctionalSpec spec;
  const AscltContext ctx = AscltContext::build(m, spec, 32.0, 51, 0.5, 16);
  const auto res = asclt_statistic(
      ctx,
      {[](double) { return 2.5; }, [](double x) { return std::abs(x); }}, 52);
  REQUIRE(res.size() == 2);
  CHECK(res[0].value == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(res[0].target == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(res[1].target ==
        doctest::Approx(ctx.sigma_hat * std::sqrt(2.0 / M_PI)).epsilon(0.01));
  CHECK(std::isfinite(res[1].value));
}

TEST_CASE("arm decay trivial levels") {
  const CovarianceModel m = bf(2);
  const std::vector<double> Rs{8.0, 16.0};
  const auto hi = arm_decay_curve(m, 6.0, Rs, 100, 61, 0.5);
  for (const auto& row : hi) {
    CHECK(row.p_one <= 0.01);
    CHECK(row.p_trunc <= 0.01);
  }
  const auto lo = arm_decay_curve(m, -6.0, Rs, 100, 62, 0.5);
  for (const auto& row : lo) CHECK(row.p_one >= 0.99);
}

TEST_CASE("volume suite at a deeply supercritical level") {
  const CovarianceModel m = bf(2);
  const VolumeReport rep = volume_suite(m, -6.0, {8.0, 16.0},
                                        {8.0, 16.0, 32.0}, 60, 71, 0.25, 6.0,
                                        0, 10);
  CHECK(rep.theta > 0.99);
  CHECK(rep.theta <= 1.0);
  CHECK(rep.cov_e00 ==
        doctest::Approx(rep.theta * (1.0 - rep.theta)).epsilon(1e-12));
  CHECK(rep.association_ok);
  CHECK(rep.continuity_ok);
  REQUIRE(rep.cox_grimmett.size() == 3);
  CHECK(rep.cox_grimmett[0].value >= rep.cox_grimmett[1].value);
  CHECK(rep.cox_grimmett[1].value >= rep.cox_grimmett[2].value);
  for (const auto& row : rep.var_curve) CHECK(row.value < 0.05);
  // at this level the volume is nearly deterministic, so the band can be 0
  CHECK(rep.lil_band >= 0.0);
  CHECK(rep.lil_L.size() == rep.lil_n.size());
  CHECK(rep.lil_exceed_fraction <= 0.2);
  CHECK_THROWS_AS(volume_suite(m, -6.0, {8.0}, {8.0}, 60, 71, 0.25, 2.0),
                  BufferTooSmall);
}
