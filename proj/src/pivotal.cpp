#include "exclab/pivotal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "exclab/errors.hpp"
#include "exclab/parallel.hpp"

namespace exclab {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Cov[(f(x), f^t(0), grad f(x), grad f^t(0))], assembled from K and its
// derivatives; cross blocks between the two fields carry a factor t.
Eigen::MatrixXd pivotal_sigma(const CovarianceModel& m, const Vec3& x,
                              double t) {
  const int d = m.d;
  const int dim = 2 + 2 * d;
  const Vec3 zero{0, 0, 0};
  Eigen::MatrixXd S(dim, dim);
  S(0, 0) = m.eval(zero);
  S(1, 1) = m.eval(zero);
  S(0, 1) = t * m.eval(x);
  for (int i = 0; i < d; ++i) {
    S(0, 2 + i) = -m.grad(zero, i);
    S(0, 2 + d + i) = -t * m.grad(x, i);
    S(1, 2 + i) = t * m.grad(x, i);
    S(1, 2 + d + i) = -m.grad(zero, i);
    for (int j = 0; j < d; ++j) {
      S(2 + i, 2 + j) = -m.hess(zero, i, j);
      S(2 + d + i, 2 + d + j) = -m.hess(zero, i, j);
      S(2 + i, 2 + d + j) = -t * m.hess(x, i, j);
    }
  }
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < i; ++j) S(i, j) = S(j, i);
  return S;
}

double det_packed(const std::array<double, 9>& H, int d) {
  if (d == 1) return H[0];
  if (d == 2) return H[0] * H[4] - H[1] * H[3];
  return H[0] * (H[4] * H[8] - H[5] * H[7]) -
         H[1] * (H[3] * H[8] - H[5] * H[6]) +
         H[2] * (H[3] * H[7] - H[4] * H[6]);
}

double ball_volume(double r, int d) {
  if (d == 1) return 2.0 * r;
  if (d == 2) return M_PI * r * r;
  return 4.0 / 3.0 * M_PI * r * r * r;
}

}  // namespace

double pivotal_density(const CovarianceModel& model, const Vec3& x, double t,
                       double level) {
  model.validate();
  const int dim = 2 + 2 * model.d;
  const Eigen::MatrixXd S = pivotal_sigma(model, x, t);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const double emin = es.eigenvalues().minCoeff();
  if (!(emin > 0))
    throw DegenerateCovariance(
        "pivotal covariance not positive definite (emin=" +
        std::to_string(emin) + ")");
  double logdet = 0;
  for (int i = 0; i < dim; ++i) logdet += std::log(es.eigenvalues()(i));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  v(0) = level;
  v(1) = level;
  const double q = v.dot(S.ldlt().solve(v));
  return std::exp(-0.5 * q - 0.5 * logdet) /
         std::pow(kTwoPi, 0.5 * dim);
}

double covariance_determinant(const CovarianceModel& model, const Vec3& y,
                              const Vec3& z, double t) {
  model.validate();
  const Vec3 x{y[0] - z[0], y[1] - z[1], y[2] - z[2]};
  return pivotal_sigma(model, x, t).determinant();
}

ConditionedPairSampler::ConditionedPairSampler(const CovarianceModel& model,
                                               const GridSpec& grid,
                                               const Vec3& x, double t,
                                               double level, bool swap_roles,
                                               double kappa_max)
    : model_(model), grid_(grid), t_(t), kappa_max_(kappa_max) {
  constraints_.push_back({x, level, true, swap_roles});
  constraints_.push_back({{0, 0, 0}, level, true, !swap_roles});
  sampler_ = std::make_shared<CirculantSampler>(model, grid);
}

FieldPair ConditionedPairSampler::sample(uint64_t seed,
                                         uint64_t replicate) const {
  const FieldPair base = sampler_->sample_pair(seed, replicate);
  return condition_on_constraints(model_, grid_, constraints_, base, t_,
                                  kappa_max_);
}

FieldPair sample_conditioned_pair(const CovarianceModel& model,
                                  const GridSpec& grid, const Vec3& x,
                                  double t, double level, uint64_t seed,
                                  uint64_t replicate) {
  return ConditionedPairSampler(model, grid, x, t, level)
      .sample(seed, replicate);
}

TopDerivPair derivative_pair_at_infinity(const FieldPair& cond, double t,
                                         const FunctionalSpec& spec,
                                         const Vec3& x, double R_stab,
                                         double eps, double delta,
                                         bool swap_roles) {
  const GridSpec& g = cond.f.grid;
  if (eps <= 0) eps = 2.5 * g.h;
  if (delta <= 0) delta = 0.05 * (1.0 + std::abs(spec.level));

  const FieldSample ft = cond.interpolate(t);
  const FieldSample& at_x = swap_roles ? ft : cond.f;
  const FieldSample& at_0 = swap_roles ? cond.f : ft;

  TopDerivPair out;
  out.stabilized = true;
  out.refinement_stable = true;
  const Vec3 zero{0, 0, 0};
  struct Probe {
    const FieldSample* fs;
    Vec3 p;
    double* slot;
  };
  Probe probes[2] = {{&at_x, x, &out.d_x}, {&at_0, zero, &out.d_0t}};
  for (const auto& pr : probes) {
    const Box b1 = Box::centered(g, R_stab, pr.p);
    const Box b2 = Box::centered(g, 2.0 * R_stab, pr.p);
    if (!b2.inside_grid(g))
      throw DomainOutsideGrid("stabilization box outside sampled grid");
    const TopDerivResult r1 =
        topological_derivative(*pr.fs, spec, b1, pr.p, eps, delta);
    const TopDerivResult r2 =
        topological_derivative(*pr.fs, spec, b2, pr.p, eps, delta);
    *pr.slot = r2.value;
    if (r1.value != r2.value) out.stabilized = false;
    if (!r1.refinement_stable || !r2.refinement_stable)
      out.refinement_stable = false;
  }
  return out;
}

void PivotalConfig::validate(const CovarianceModel& model) const {
  model.validate();
  if (!(rho_max > 0)) throw ConfigInvalid("rho_max must be positive");
  if (!(x_step > 0)) throw ConfigInvalid("x_step must be positive");
  if (!(grid_h > 0)) throw ConfigInvalid("grid_h must be positive");
  const double steps = 0.5 * x_step / grid_h;
  if (std::abs(steps - std::round(steps)) > 1e-9)
    throw ConfigInvalid("x_step/2 must be a multiple of grid_h");
  const double nx = 2.0 * rho_max / x_step;
  if (std::abs(nx - std::round(nx)) > 1e-9)
    throw ConfigInvalid("2*rho_max must be a multiple of x_step");
  if (t_nodes < 1) throw ConfigInvalid("t_nodes must be >= 1");
  if (!(t_cap > 0 && t_cap < 0.5))
    throw ConfigInvalid("t_cap must lie in (0, 0.5)");
  if (replicates < 2) throw ConfigInvalid("replicates must be >= 2");
  if (!(R_stab > 0)) throw ConfigInvalid("R_stab must be positive");
}

nlohmann::json Sigma2Result::to_json() const {
  return {{"sigma2", sigma2},
          {"se", se},
          {"nodes", nodes},
          {"dropped_nodes", dropped_nodes},
          {"dropped_draws", dropped_draws},
          {"not_stabilized", not_stabilized},
          {"omitted_ball", omitted_ball},
          {"partial_rho_half", partial_rho_half},
          {"partial_t_inner", partial_t_inner}};
}

Sigma2Result estimate_sigma2(const CovarianceModel& model,
                             const PivotalConfig& cfg, uint64_t seed,
                             int workers) {
  cfg.validate(model);
  workers = resolve_workers(workers);
  const int d = model.d;
  const double h = cfg.grid_h;

  // One shared grid large enough that the 2 R_stab boxes around any x node
  // and around the origin stay interior.
  double R_grid = 2.0 * (cfg.rho_max + cfg.R_stab + 1.0);
  if (llround(R_grid / h) % 2 != 0) R_grid += h;
  GridSpec grid{d, R_grid, h, 0.0};
  grid.validate();
  const CirculantSampler sampler(model, grid);

  // Midpoint x-nodes on [-rho, rho]^d, the ball |x| <= 2h excluded.
  const int nx1 = int(std::llround(2.0 * cfg.rho_max / cfg.x_step));
  std::vector<Vec3> xs;
  std::array<int, 3> k{0, 0, 0};
  const int n1 = (d >= 2) ? nx1 : 1, n2 = (d >= 3) ? nx1 : 1;
  for (k[2] = 0; k[2] < n2; ++k[2])
    for (k[1] = 0; k[1] < n1; ++k[1])
      for (k[0] = 0; k[0] < nx1; ++k[0]) {
        Vec3 x{0, 0, 0};
        double r2 = 0;
        for (int a = 0; a < d; ++a) {
          x[a] = -cfg.rho_max + (k[a] + 0.5) * cfg.x_step;
          x[a] = grid.coord(grid.index_of(x[a]));  // exact node coordinate
          r2 += x[a] * x[a];
        }
        if (r2 > 4.0 * h * h) xs.push_back(x);
      }

  const double wx = std::pow(cfg.x_step, d);
  const double wt = (1.0 - cfg.t_cap) / cfg.t_nodes;

  struct NodeOut {
    double contrib = 0, contrib_t_inner = 0, var_sum = 0, dens = 0;
    int64_t dropped_draws = 0, not_stabilized = 0;
    bool any_kept = false;
  };
  std::vector<NodeOut> outs(xs.size());

  parallel_for(int64_t(xs.size()), workers, [&](int64_t ix) {
    const Vec3& x = xs[size_t(ix)];
    NodeOut& no = outs[size_t(ix)];
    std::array<int, 3> nx{0, 0, 0}, n0{0, 0, 0};
    for (int a = 0; a < d; ++a) {
      nx[a] = grid.index_of(x[a]);
      n0[a] = grid.index_of(0.0);
    }
    for (int jt = 0; jt < cfg.t_nodes; ++jt) {
      const double t = (jt + 0.5) * wt;
      std::vector<ConditioningConstraint> cons{
          {x, cfg.spec.level, true, cfg.swap_roles},
          {{0, 0, 0}, cfg.spec.level, true, !cfg.swap_roles}};
      double phi = 0;
      try {
        phi = pivotal_density(model, x, t, cfg.spec.level);
      } catch (const DegenerateCovariance&) {
        no.dropped_draws += cfg.replicates;
        continue;
      }
      std::vector<double> ys;
      ys.reserve(size_t(cfg.replicates));
      for (int rep = 0; rep < cfg.replicates; ++rep) {
        const uint64_t rid =
            (uint64_t(ix) * uint64_t(cfg.t_nodes) + uint64_t(jt)) *
                uint64_t(cfg.replicates) +
            uint64_t(rep);
        FieldPair pair;
        try {
          pair = condition_on_constraints(model, grid, cons,
                                          sampler.sample_pair(seed, rid), t,
                                          cfg.kappa_max);
        } catch (const DegenerateConstraintSet&) {
          ++no.dropped_draws;
          continue;
        }
        const TopDerivPair dp = derivative_pair_at_infinity(
            pair, t, cfg.spec, x, cfg.R_stab, 0.0, 0.0, cfg.swap_roles);
        if (!dp.stabilized || !dp.refinement_stable) {
          ++no.not_stabilized;
          continue;
        }
        const FieldSample ft = pair.interpolate(t);
        const FieldSample& fx = cfg.swap_roles ? ft : pair.f;
        const FieldSample& f0 = cfg.swap_roles ? pair.f : ft;
        const double detx = std::abs(det_packed(fd_hessian(fx, nx), d));
        const double det0 = std::abs(det_packed(fd_hessian(f0, n0), d));
        ys.push_back(detx * det0 * dp.d_x * dp.d_0t);
      }
      if (ys.empty()) continue;
      no.any_kept = true;
      const double nrep = double(ys.size());
      const double mean =
          std::accumulate(ys.begin(), ys.end(), 0.0) / nrep;
      double var = 0;
      for (double y : ys) var += (y - mean) * (y - mean);
      var = (ys.size() > 1) ? var / (nrep - 1.0) : 0.0;
      const double w = wx * wt * model.eval(x) * phi;
      no.contrib += w * mean;
      no.dens += wt * model.eval(x) * phi * mean;
      if (t <= 1.0 - 2.0 * cfg.t_cap) no.contrib_t_inner += w * mean;
      no.var_sum += w * w * var / nrep;
    }
  });

  Sigma2Result res;
  res.nodes = int64_t(xs.size());
  double var_total = 0, min_r2 = 1e300, dens_near = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const NodeOut& no = outs[i];
    res.sigma2 += no.contrib;
    res.partial_t_inner += no.contrib_t_inner;
    var_total += no.var_sum;
    res.dropped_draws += no.dropped_draws;
    res.not_stabilized += no.not_stabilized;
    if (!no.any_kept) ++res.dropped_nodes;
    double r2 = 0;
    bool in_half = true;
    for (int a = 0; a < d; ++a) {
      r2 += xs[i][a] * xs[i][a];
      if (std::abs(xs[i][a]) > 0.5 * cfg.rho_max) in_half = false;
    }
    if (in_half) res.partial_rho_half += no.contrib;
    if (no.any_kept && r2 < min_r2) {
      min_r2 = r2;
      dens_near = no.dens;
    }
  }
  res.se = std::sqrt(var_total);
  res.omitted_ball = std::abs(dens_near) * ball_volume(2.0 * h, d);
  return res;
}

std::vector<QuasiRow> quasi_association_check(
    const CovarianceModel& model, const FunctionalSpec& spec, double box_side,
    const std::vector<double>& separations, double lip_f, double lip_g, int N,
    uint64_t seed, int workers, double grid_h) {
  model.validate();
  if (box_side <= 0) throw ConfigInvalid("box_side must be positive");
  if (N < 2) throw ConfigInvalid("need at least two replicates");
  workers = resolve_workers(workers);
  const int d = model.d;
  const double smax =
      *std::max_element(separations.begin(), separations.end());

  double R_grid = smax + 2.0 * box_side + 4.0;
  if (llround(R_grid / grid_h) % 2 != 0) R_grid += grid_h;
  GridSpec grid{d, R_grid, grid_h, 0.0};
  grid.validate();
  const CirculantSampler sampler(model, grid);

  auto make_box = [&](double s, int side_sign) {
    Box b;
    const double lo0 =
        side_sign < 0 ? -0.5 * s - box_side : 0.5 * s;
    b.lo[0] = grid.index_of(lo0);
    b.hi[0] = grid.index_of(lo0 + box_side);
    for (int a = 1; a < d; ++a) {
      b.lo[a] = grid.index_of(-0.5 * box_side);
      b.hi[a] = grid.index_of(0.5 * box_side);
    }
    return b;
  };

  // Per-replicate functional values for every separation.
  std::vector<std::vector<double>> va(separations.size()),
      vb(separations.size());
  for (auto& v : va) v.assign(size_t(N), 0.0);
  for (auto& v : vb) v.assign(size_t(N), 0.0);
  parallel_for(N, workers, [&](int64_t rep) {
    const FieldSample fs = sampler.sample(seed, uint64_t(rep));
    const ExcursionGeometry geom =
        label_components(extract_excursion(fs, spec));
    for (size_t si = 0; si < separations.size(); ++si) {
      va[si][size_t(rep)] =
          bounded_functional(geom, spec, make_box(separations[si], -1));
      vb[si][size_t(rep)] =
          bounded_functional(geom, spec, make_box(separations[si], +1));
    }
  });

  // Integrated envelope over the 2-fattened boxes via the difference
  // variable: int ktilde(u) prod_a overlap_a(u_a) du.
  auto envelope_integral = [&](double s) {
    std::array<double, 3> alo{0, 0, 0}, ahi{0, 0, 0}, blo{0, 0, 0},
        bhi{0, 0, 0};
    alo[0] = -0.5 * s - box_side - 2.0;
    ahi[0] = -0.5 * s + 2.0;
    blo[0] = 0.5 * s - 2.0;
    bhi[0] = 0.5 * s + box_side + 2.0;
    for (int a = 1; a < d; ++a) {
      alo[a] = blo[a] = -0.5 * box_side - 2.0;
      ahi[a] = bhi[a] = 0.5 * box_side + 2.0;
    }
    const double hq = 0.5;
    std::array<int, 3> nq{1, 1, 1};
    for (int a = 0; a < d; ++a)
      nq[a] = std::max<int>(
          1, int(std::ceil(((ahi[a] - blo[a]) - (alo[a] - bhi[a])) / hq)));
    double total = 0;
    std::array<int, 3> kq{0, 0, 0};
    for (kq[2] = 0; kq[2] < nq[2]; ++kq[2])
      for (kq[1] = 0; kq[1] < nq[1]; ++kq[1])
        for (kq[0] = 0; kq[0] < nq[0]; ++kq[0]) {
          Vec3 u{0, 0, 0};
          double w = 1.0;
          for (int a = 0; a < d; ++a) {
            u[a] = (alo[a] - bhi[a]) + (kq[a] + 0.5) * hq;
            // |A_a intersect (B_a + u)|
            const double ov = std::min(ahi[a], bhi[a] + u[a]) -
                              std::max(alo[a], blo[a] + u[a]);
            w *= std::max(0.0, ov);
          }
          if (w > 0) total += model.ktilde(u) * w * std::pow(hq, d);
        }
    return total;
  };

  std::vector<QuasiRow> rows;
  const double lip_phi = spec.lip_norm();
  for (size_t si = 0; si < separations.size(); ++si) {
    QuasiRow row;
    row.separation = separations[si];
    double ma = 0, mb = 0;
    for (int i = 0; i < N; ++i) {
      ma += va[si][size_t(i)];
      mb += vb[si][size_t(i)];
    }
    ma /= N;
    mb /= N;
    std::vector<double> u(static_cast<size_t>(N));
    double cov = 0;
    for (int i = 0; i < N; ++i) {
      u[size_t(i)] = (va[si][size_t(i)] - ma) * (vb[si][size_t(i)] - mb);
      cov += u[size_t(i)];
    }
    cov /= (N - 1);
    double su = 0;
    const double mu = std::accumulate(u.begin(), u.end(), 0.0) / N;
    for (double v : u) su += (v - mu) * (v - mu);
    row.cov = cov;
    row.se = std::sqrt(su / (N - 1)) / std::sqrt(double(N));
    row.bound =
        lip_f * lip_g * lip_phi * lip_phi * envelope_integral(row.separation);
    row.ratio = row.bound > 0 ? std::abs(row.cov) / row.bound : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace exclab
