#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "exclab/covariance.hpp"
#include "exclab/errors.hpp"
#include "exclab/rng.hpp"

using namespace exclab;

namespace {

CovarianceModel bf(int d, double s = 1.0) {
  CovarianceModel m;
  m.family = Family::BargmannFock;
  m.d = d;
  m.length_scale = s;
  return m;
}

CovarianceModel poly(int d, double beta, double s = 1.0) {
  CovarianceModel m;
  m.family = Family::PolyDecay;
  m.d = d;
  m.beta = beta;
  m.length_scale = s;
  return m;
}

CovarianceModel cosmix(int d, double w = 0.5, double s = 1.0) {
  CovarianceModel m;
  m.family = Family::CosineMixture;
  m.d = d;
  m.mix_weight = w;
  m.length_scale = s;
  return m;
}

double norm(const Vec3& x) {
  return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
}

}  // namespace

TEST_CASE("unit variance and known values") {
  CHECK(bf(2).eval({0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(bf(2).eval({1, 0, 0}) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(poly(2, 5).eval({0, 0, 0}) == doctest::Approx(1.0));
  CHECK(cosmix(2).eval({0, 0, 0}) == doctest::Approx(1.0));
}

TEST_CASE("symmetry and boundedness on random lags") {
  const CounterRng rng(11, 0, RngRole::Scratch);
  for (const auto& m : {bf(2), poly(2, 5), cosmix(2), bf(3, 2.0),
                        poly(3, 4.5, 1.5), cosmix(1, 0.3, 0.7)}) {
    for (uint64_t i = 0; i < 200; ++i) {
      const auto u = rng.uniform2(i);
      const auto v = rng.uniform2(i + 1000);
      Vec3 x{(u[0] - 0.5) * 10, 0, 0};
      if (m.d >= 2) x[1] = (u[1] - 0.5) * 10;
      if (m.d >= 3) x[2] = (v[0] - 0.5) * 10;
      const Vec3 nx{-x[0], -x[1], -x[2]};
      CHECK(m.eval(x) == doctest::Approx(m.eval(nx)).epsilon(1e-13));
      CHECK(std::abs(m.eval(x)) <= 1.0 + 1e-13);
    }
  }
}

TEST_CASE("polynomial-decay envelope on a lag grid") {
  const CovarianceModel m = poly(2, 5);
  const double C = m.envelope_c();
  int checked = 0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const Vec3 x{0.7 * i, 0.7 * j, 0};
      CHECK(std::abs(m.eval(x)) <=
            C * std::pow(1.0 + norm(x), -m.beta) + 1e-13);
      ++checked;
    }
  CHECK(checked == 100);
}

TEST_CASE("ktilde basics") {
  for (const auto& m : {bf(2), poly(2, 5), cosmix(2)}) {
    CHECK(m.ktilde({0, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
    for (double r : {0.5, 1.5, 3.0, 6.0}) {
      const Vec3 x{r, 0, 0};
      CHECK(m.ktilde(x) >= std::abs(m.eval(x)) - 1e-13);
    }
  }
  // Gaussian kernel: sup over the unit ball around (3,0) sits at radius 2
  CHECK(bf(2).ktilde({3, 0, 0}) ==
        doctest::Approx(std::exp(-2.0)).epsilon(1e-9));
}

TEST_CASE("ktilde envelope decay for polynomial tails") {
  const CovarianceModel m = poly(2, 5);
  const double C = m.envelope_c();
  for (double r : {4.0, 8.0, 16.0}) {
    const double kt = m.ktilde({r, 0, 0});
    // K~(x) <= sup over |y| >= |x|-1 of C(1+|y|)^-beta = C|x|^-beta
    CHECK(kt <= C * std::pow(r, -m.beta) + 1e-13);
    CHECK(kt >= std::abs(m.eval({r, 0, 0})) - 1e-13);
  }
}

TEST_CASE("analytic derivatives match finite differences") {
  const double e = 1e-5;
  const CounterRng rng(3, 0, RngRole::Scratch);
  for (const auto& m :
       {bf(2), poly(2, 5), cosmix(2), bf(3, 1.4), poly(3, 4.2), cosmix(3)}) {
    for (uint64_t k = 0; k < 20; ++k) {
      const auto u = rng.uniform2(k);
      const auto v = rng.uniform2(k + 500);
      Vec3 x{(u[0] - 0.5) * 4, 0, 0};
      if (m.d >= 2) x[1] = (u[1] - 0.5) * 4;
      if (m.d >= 3) x[2] = (v[0] - 0.5) * 4;
      for (int i = 0; i < m.d; ++i) {
        Vec3 p = x, q = x;
        p[i] += e;
        q[i] -= e;
        const double fd = (m.eval(p) - m.eval(q)) / (2 * e);
        CHECK(m.grad(x, i) == doctest::Approx(fd).epsilon(1e-5));
        for (int j = 0; j < m.d; ++j) {
          Vec3 pp = p, pm = p, mp = q, mm = q;
          pp[j] += e;
          pm[j] -= e;
          mp[j] += e;
          mm[j] -= e;
          const double fd2 = (m.eval(pp) - m.eval(pm) - m.eval(mp) +
                              m.eval(mm)) /
                             (4 * e * e);
          CHECK(m.hess(x, i, j) == doctest::Approx(fd2).epsilon(2e-4));
        }
      }
    }
  }
}

TEST_CASE("second spectral moment") {
  CHECK(bf(2).lambda2() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bf(2, 2.0).lambda2() == doctest::Approx(0.25).epsilon(1e-12));
  const CovarianceModel cm = cosmix(2, 0.5, 1.0);
  CHECK(cm.lambda2() ==
        doctest::Approx(0.5 + 0.5 / 2.0).epsilon(1e-12));
}

TEST_CASE("validation rejects bad parameters") {
  CHECK_THROWS_AS(poly(2, 1.5).validate(), ConfigInvalid);   // beta <= d
  CHECK_THROWS_AS(bf(4).validate(), ConfigInvalid);          // bad dimension
  CovarianceModel m = bf(2, -1.0);
  CHECK_THROWS_AS(m.validate(), ConfigInvalid);
  CovarianceModel w = cosmix(2, 1.5);
  CHECK_THROWS_AS(w.validate(), ConfigInvalid);
}

TEST_CASE("json round trip") {
  for (const auto& m : {bf(2, 1.5), poly(3, 4.5, 2.0), cosmix(1, 0.25)}) {
    const CovarianceModel back = CovarianceModel::from_json(m.to_json());
    CHECK(back.family == m.family);
    CHECK(back.d == m.d);
    CHECK(back.length_scale == m.length_scale);
    CHECK(back.beta == m.beta);
    CHECK(back.mix_weight == m.mix_weight);
    CHECK(back.eval({0.7, 0.3, 0.1}) == m.eval({0.7, 0.3, 0.1}));
  }
}
