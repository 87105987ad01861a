#pragma once

#include <vector>

#include "exclab/grid.hpp"

namespace exclab {

// One constraint of the event A^t_{x,y}: pin the value (and optionally the
// gradient) of f or of the interpolated field f^t at a point.
struct ConditioningConstraint {
  Vec3 x{0, 0, 0};
  double level = 0.0;
  bool constrain_gradient = false;
  bool on_interpolated = false;  // false: applies to f, true: to f^t
};

// Gaussian-regression (kriging residual) conditioning of the pair (f, f~)
// on the listed constraints, with f^t = t f + sqrt(1-t^2) f~. Gradient
// constraints are imposed on the central-difference functionals with exact
// finite-difference covariances, so the conditioned grid satisfies the
// discrete gradient constraints exactly; the continuum gradient differs by
// O(h^2).
FieldPair condition_on_constraints(
    const CovarianceModel& model, const GridSpec& grid,
    const std::vector<ConditioningConstraint>& constraints,
    const FieldPair& base, double t, double kappa_max = 1e12);

// Central-difference gradient of a sampled field at a node.
Vec3 fd_gradient(const FieldSample& fs, const std::array<int, 3>& idx);
// Central second-difference Hessian (d x d, packed row-major).
std::array<double, 9> fd_hessian(const FieldSample& fs,
                                 const std::array<int, 3>& idx);

}  // namespace exclab
