#include "exclab/conditioning.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "exclab/errors.hpp"

namespace exclab {

namespace {

// Linear functional of the pair: value or partial derivative of f or f^t at
// a point.
struct Functional {
  Vec3 x;
  int axis = -1;  // -1: value, otherwise d/dx_axis
  bool on_interp = false;
  double target = 0.0;
};

Vec3 diff(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

// Cov[L_a(g), L_b(g)] for one underlying field g. Gradient functionals are
// the central differences D_a f(x) = (f(x+h e_a) - f(x-h e_a)) / 2h, so
// their covariances are exact finite differences of K; this makes discrete
// gradient constraints hold exactly on the conditioned grid.
double base_cov(const CovarianceModel& m, double h, const Functional& a,
                const Functional& b) {
  const Vec3 u = diff(a.x, b.x);
  if (a.axis < 0 && b.axis < 0) return m.eval(u);
  if (a.axis >= 0 && b.axis >= 0) {
    double s = 0;
    for (int sa : {+1, -1})
      for (int sb : {+1, -1}) {
        Vec3 w = u;
        w[a.axis] += sa * h;
        w[b.axis] -= sb * h;
        s += sa * sb * m.eval(w);
      }
    return s / (4.0 * h * h);
  }
  const int axis = (a.axis >= 0) ? a.axis : b.axis;
  const double sign = (a.axis >= 0) ? 1.0 : -1.0;
  Vec3 p = u, q = u;
  p[axis] += h;
  q[axis] -= h;
  return sign * (m.eval(p) - m.eval(q)) / (2.0 * h);
}

// Multiplier from the (f, f^t) pairing: cross terms pick up a factor t.
double pair_factor(const Functional& a, const Functional& b, double t) {
  return (a.on_interp == b.on_interp) ? 1.0 : t;
}

}  // namespace

Vec3 fd_gradient(const FieldSample& fs, const std::array<int, 3>& idx) {
  Vec3 g{0, 0, 0};
  const double h = fs.grid.h;
  for (int a = 0; a < fs.grid.d; ++a) {
    auto p = idx, q = idx;
    p[a] += 1;
    q[a] -= 1;
    g[a] = (fs.at(p) - fs.at(q)) / (2.0 * h);
  }
  return g;
}

std::array<double, 9> fd_hessian(const FieldSample& fs,
                                 const std::array<int, 3>& idx) {
  std::array<double, 9> H{};
  const int d = fs.grid.d;
  const double h = fs.grid.h;
  const double c = fs.at(idx);
  for (int a = 0; a < d; ++a) {
    auto p = idx, q = idx;
    p[a] += 1;
    q[a] -= 1;
    H[size_t(a * 3 + a)] = (fs.at(p) - 2.0 * c + fs.at(q)) / (h * h);
    for (int bax = a + 1; bax < d; ++bax) {
      auto pp = idx, pm = idx, mp = idx, mm = idx;
      pp[a] += 1; pp[bax] += 1;
      pm[a] += 1; pm[bax] -= 1;
      mp[a] -= 1; mp[bax] += 1;
      mm[a] -= 1; mm[bax] -= 1;
      const double v =
          (fs.at(pp) - fs.at(pm) - fs.at(mp) + fs.at(mm)) / (4.0 * h * h);
      H[size_t(a * 3 + bax)] = v;
      H[size_t(bax * 3 + a)] = v;
    }
  }
  return H;
}

FieldPair condition_on_constraints(
    const CovarianceModel& model, const GridSpec& grid,
    const std::vector<ConditioningConstraint>& constraints,
    const FieldPair& base, double t, double kappa_max) {
  if (constraints.empty()) return base;
  if (!(base.f.grid == grid) || !(base.f_tilde.grid == grid))
    throw MismatchedGrids("conditioning base pair does not match grid");

  const int d = grid.d;
  const int n = grid.n();

  // Expand constraints into scalar functionals, snapping points to nodes so
  // value constraints can be verified exactly on the grid.
  std::vector<Functional> fns;
  std::vector<std::array<int, 3>> nodes;
  for (const auto& c : constraints) {
    std::array<int, 3> idx{0, 0, 0};
    Vec3 snapped{0, 0, 0};
    for (int a = 0; a < d; ++a) {
      idx[a] = grid.index_of(c.x[a]);
      if (idx[a] < 0 || idx[a] >= n)
        throw DomainOutsideGrid("constraint point outside sampled grid");
      if (c.constrain_gradient && (idx[a] < 2 || idx[a] >= n - 2))
        throw DomainOutsideGrid(
            "gradient constraint point closer than 2h to grid edge");
      snapped[a] = grid.coord(idx[a]);
    }
    nodes.push_back(idx);
    fns.push_back({snapped, -1, c.on_interpolated, c.level});
    if (c.constrain_gradient)
      for (int a = 0; a < d; ++a)
        fns.push_back({snapped, a, c.on_interpolated, 0.0});
  }
  const int mdim = int(fns.size());

  Eigen::MatrixXd Sigma(mdim, mdim);
  for (int i = 0; i < mdim; ++i)
    for (int j = 0; j < mdim; ++j)
      Sigma(i, j) = pair_factor(fns[size_t(i)], fns[size_t(j)], t) *
                    base_cov(model, grid.h, fns[size_t(i)], fns[size_t(j)]);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma);
  const double emin = es.eigenvalues().minCoeff();
  const double emax = es.eigenvalues().maxCoeff();
  if (!(emin > 0) || emax / emin >= kappa_max)
    throw DegenerateConstraintSet(
        "constraint covariance condition number >= kappa_max (emin=" +
        std::to_string(emin) + ")");

  // Observed functional values from the base pair; gradients by central
  // differences, f^t values via interpolation of the two node values.
  const double ct = std::sqrt(std::max(0.0, 1.0 - t * t));
  Eigen::VectorXd resid(mdim);
  {
    int j = 0;
    size_t ci = 0;
    for (const auto& c : constraints) {
      const auto& idx = nodes[ci++];
      auto value_of = [&](const FieldSample& fs) { return fs.at(idx); };
      auto grad_of = [&](const FieldSample& fs, int a) {
        auto p = idx, q = idx;
        p[a] += 1;
        q[a] -= 1;
        return (fs.at(p) - fs.at(q)) / (2.0 * grid.h);
      };
      double obs = c.on_interpolated
                       ? t * value_of(base.f) + ct * value_of(base.f_tilde)
                       : value_of(base.f);
      resid(j) = fns[size_t(j)].target - obs;
      ++j;
      if (c.constrain_gradient)
        for (int a = 0; a < d; ++a) {
          obs = c.on_interpolated
                    ? t * grad_of(base.f, a) + ct * grad_of(base.f_tilde, a)
                    : grad_of(base.f, a);
          resid(j) = fns[size_t(j)].target - obs;
          ++j;
        }
    }
  }
  const Eigen::VectorXd delta = Sigma.ldlt().solve(resid);

  // Kriging correction fields. Cross-covariances of the pair with L_j:
  //   Cov[f(u), L_j]  = base_cov(u, L_j) * (1 if L_j on f, t if on f^t)
  //   Cov[f~(u), L_j] = base_cov(u, L_j) * (0 if on f, sqrt(1-t^2) if f^t)
  FieldPair out = base;
  const int64_t ncells = grid.ncells();
  std::array<int, 3> idx{0, 0, 0};
  for (int64_t lin = 0; lin < ncells; ++lin) {
    int64_t rem = lin;
    for (int a = 0; a < d; ++a) {
      idx[a] = int(rem % n);
      rem /= n;
    }
    Vec3 u{0, 0, 0};
    for (int a = 0; a < d; ++a) u[a] = grid.coord(idx[a]);
    double corr_f = 0, corr_ft = 0;
    for (int j = 0; j < mdim; ++j) {
      const Functional& L = fns[size_t(j)];
      const Vec3 w = diff(u, L.x);
      double c0;
      if (L.axis < 0) {
        c0 = model.eval(w);
      } else {
        Vec3 p = w, q = w;
        p[L.axis] += grid.h;
        q[L.axis] -= grid.h;
        c0 = -(model.eval(p) - model.eval(q)) / (2.0 * grid.h);
      }
      if (!L.on_interp) {
        corr_f += c0 * delta(j);
      } else {
        corr_f += t * c0 * delta(j);
        corr_ft += ct * c0 * delta(j);
      }
    }
    out.f.values[size_t(lin)] += corr_f;
    out.f_tilde.values[size_t(lin)] += corr_ft;
  }
  return out;
}

}  // namespace exclab
