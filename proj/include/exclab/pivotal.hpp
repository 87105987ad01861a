#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "exclab/conditioning.hpp"
#include "exclab/sampler.hpp"
#include "exclab/topology.hpp"

namespace exclab {

// Density of the Gaussian vector (f(x), f^t(0), grad f(x), grad f^t(0))
// evaluated at (level, level, 0, 0), assembled from K and its derivatives.
double pivotal_density(const CovarianceModel& model, const Vec3& x, double t,
                       double level);

// Determinant of Cov[f(y), f^t(z), grad f(y), grad f^t(z)].
double covariance_determinant(const CovarianceModel& model, const Vec3& y,
                              const Vec3& z, double t);

// Reusable sampler for pairs conditioned on the event
// A^t_{x,0} = {f(x) = f^t(0) = level, grad f(x) = grad f^t(0) = 0}.
// swap_roles exchanges which field is pinned where (distributional symmetry
// probe). Returned pair is (f, f~); f^t = pair.interpolate(t).
class ConditionedPairSampler {
 public:
  ConditionedPairSampler(const CovarianceModel& model, const GridSpec& grid,
                         const Vec3& x, double t, double level,
                         bool swap_roles = false, double kappa_max = 1e12);
  FieldPair sample(uint64_t seed, uint64_t replicate) const;
  const GridSpec& grid() const { return grid_; }

 private:
  CovarianceModel model_;
  GridSpec grid_;
  std::vector<ConditioningConstraint> constraints_;
  double t_;
  double kappa_max_;
  std::shared_ptr<const CirculantSampler> sampler_;
};

FieldPair sample_conditioned_pair(const CovarianceModel& model,
                                  const GridSpec& grid, const Vec3& x,
                                  double t, double level, uint64_t seed,
                                  uint64_t replicate = 0);

struct TopDerivPair {
  double d_x = 0.0;    // d_x Phi_inf of f at x
  double d_0t = 0.0;   // d_0 Phi_inf of f^t at 0
  bool stabilized = false;        // Lambda_{R_stab} and Lambda_{2 R_stab} agree
  bool refinement_stable = true;  // invariant under halving (eps, delta)
};

// Topological derivatives at x (for f) and 0 (for f^t), each evaluated on
// boxes of side R_stab and 2 R_stab centered at the point. eps/delta <= 0
// selects automatic bump parameters.
TopDerivPair derivative_pair_at_infinity(const FieldPair& cond, double t,
                                         const FunctionalSpec& spec,
                                         const Vec3& x, double R_stab,
                                         double eps = 0.0, double delta = 0.0,
                                         bool swap_roles = false);

struct PivotalConfig {
  FunctionalSpec spec;      // functional and level
  double rho_max = 5.0;     // spatial truncation of the x-integral
  double x_step = 0.5;      // midpoint-rule pitch
  int t_nodes = 10;         // midpoint nodes on [0, 1 - t_cap]
  double t_cap = 0.02;
  int replicates = 48;      // Monte Carlo draws per (x, t) node
  double R_stab = 12.0;     // stabilization box side
  double grid_h = 0.0625;   // sampling grid pitch for conditioned draws
  double kappa_max = 1e12;
  bool swap_roles = false;

  void validate(const CovarianceModel& model) const;
};

struct Sigma2Result {
  double sigma2 = 0.0, se = 0.0;
  int64_t nodes = 0, dropped_nodes = 0, dropped_draws = 0,
          not_stabilized = 0;
  double omitted_ball = 0.0;      // nearest-node proxy for |x| <= 2h
  double partial_rho_half = 0.0;  // contribution from |x| <= rho_max/2
  double partial_t_inner = 0.0;   // contribution from t <= 1 - 2 t_cap
  nlohmann::json to_json() const;
};

// Monte Carlo + quadrature estimate of
// sigma^2 = int K(x) int_0^1 mu^t_{x,0}(d_x Phi_inf d_0^t Phi_inf) dt dx.
Sigma2Result estimate_sigma2(const CovarianceModel& model,
                             const PivotalConfig& cfg, uint64_t seed,
                             int workers = 0);

struct QuasiRow {
  double separation = 0, cov = 0, se = 0, bound = 0, ratio = 0;
};

// Covariance of F(Phi(D1)) and G(Phi(D2)) against the integrated K-tilde
// envelope over D1^{+2} x D2^{+2}, for boxes of side box_side separated
// along axis 0. F and G are applied as scalar Lipschitz maps; lip constants
// enter the bound.
std::vector<QuasiRow> quasi_association_check(
    const CovarianceModel& model, const FunctionalSpec& spec, double box_side,
    const std::vector<double>& separations, double lip_f, double lip_g, int N,
    uint64_t seed, int workers = 0, double grid_h = 0.5);

}  // namespace exclab
