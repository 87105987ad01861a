#pragma once

#include <array>
#include <string>

#include <nlohmann/json.hpp>

namespace exclab {

using Vec3 = std::array<double, 3>;

enum class Family { BargmannFock, PolyDecay, CosineMixture };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Stationary unit-variance covariance kernel with analytic derivatives.
//
// BargmannFock:   K(x) = exp(-|x|^2 / (2 s^2))
// PolyDecay:      K(x) = (1 + |x|^2/s^2)^(-beta/2), a Gaussian scale mixture,
//                 positive definite with |K(x)| <= 2^(beta/2) (1+|x|)^(-beta)
//                 when s >= 1 (envelope constant recorded in envelope_c()).
// CosineMixture:  K(x) = w exp(-|x|^2/2) + (1-w)/d * sum_i cos(x_i/s); a test
//                 kernel with spectral atoms, handy for exactness checks.
struct CovarianceModel {
  Family family = Family::BargmannFock;
  int d = 2;
  double length_scale = 1.0;
  double beta = 0.0;        // PolyDecay only; requires beta > d
  double mix_weight = 0.5;  // CosineMixture only; weight of the Gaussian part

  void validate() const;  // throws ConfigInvalid

  double eval(const Vec3& x) const;          // K(x)
  double grad(const Vec3& x, int i) const;   // dK/dx_i
  double hess(const Vec3& x, int i, int j) const;  // d2K/dx_i dx_j

  // sup_{|y-x|<=1} |K(y)| over a deterministic refined sample of the unit
  // ball (lattice at pitch 1/3 plus sphere points along lattice directions).
  double ktilde(const Vec3& x) const;

  // Envelope constant C with |K(x)| <= C (1+|x|)^{-beta} (PolyDecay).
  double envelope_c() const;

  // Second spectral moment along one axis: lambda = -d2K/dx_i^2 at 0.
  double lambda2() const;

  nlohmann::json to_json() const;
  static CovarianceModel from_json(const nlohmann::json& j);
};

}  // namespace exclab
