#include "exclab/covariance.hpp"

#include <cmath>
#include <vector>

#include "exclab/errors.hpp"

namespace exclab {

std::string family_name(Family f) {
  switch (f) {
    case Family::BargmannFock: return "bargmann-fock";
    case Family::PolyDecay: return "poly-decay";
    case Family::CosineMixture: return "cosine-mixture";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "bargmann-fock") return Family::BargmannFock;
  if (name == "poly-decay") return Family::PolyDecay;
  if (name == "cosine-mixture") return Family::CosineMixture;
  throw ConfigInvalid("unknown covariance family '" + name + "'");
}

void CovarianceModel::validate() const {
  if (d < 1 || d > 3) throw ConfigInvalid("dimension d must be in {1,2,3}");
  if (!(length_scale > 0)) throw ConfigInvalid("length_scale must be > 0");
  if (family == Family::PolyDecay && !(beta > d))
    throw ConfigInvalid("PolyDecay requires beta > d");
  if (family == Family::CosineMixture &&
      !(mix_weight >= 0 && mix_weight <= 1))
    throw ConfigInvalid("mix_weight must be in [0,1]");
}

namespace {
double sqnorm(const Vec3& x, int d) {
  double s = 0;
  for (int i = 0; i < d; ++i) s += x[i] * x[i];
  return s;
}
}  // namespace

double CovarianceModel::eval(const Vec3& x) const {
  const double s2 = length_scale * length_scale;
  const double q = sqnorm(x, d) / s2;
  switch (family) {
    case Family::BargmannFock:
      return std::exp(-0.5 * q);
    case Family::PolyDecay:
      return std::pow(1.0 + q, -0.5 * beta);
    case Family::CosineMixture: {
      double c = 0;
      for (int i = 0; i < d; ++i) c += std::cos(x[i] / length_scale);
      return mix_weight * std::exp(-0.5 * sqnorm(x, d)) +
             (1.0 - mix_weight) * c / d;
    }
  }
  return 0;
}

double CovarianceModel::grad(const Vec3& x, int i) const {
  const double s2 = length_scale * length_scale;
  const double q = sqnorm(x, d) / s2;
  switch (family) {
    case Family::BargmannFock:
      return -(x[i] / s2) * std::exp(-0.5 * q);
    case Family::PolyDecay:
      return -beta * (x[i] / s2) * std::pow(1.0 + q, -0.5 * beta - 1.0);
    case Family::CosineMixture:
      return mix_weight * (-x[i]) * std::exp(-0.5 * sqnorm(x, d)) +
             (1.0 - mix_weight) *
                 (-std::sin(x[i] / length_scale) / length_scale) / d;
  }
  return 0;
}

double CovarianceModel::hess(const Vec3& x, int i, int j) const {
  const double s2 = length_scale * length_scale;
  const double q = sqnorm(x, d) / s2;
  const double dij = (i == j) ? 1.0 : 0.0;
  switch (family) {
    case Family::BargmannFock:
      return (x[i] * x[j] / (s2 * s2) - dij / s2) * std::exp(-0.5 * q);
    case Family::PolyDecay:
      return -beta / s2 * std::pow(1.0 + q, -0.5 * beta - 1.0) * dij +
             beta * (beta + 2.0) * x[i] * x[j] / (s2 * s2) *
                 std::pow(1.0 + q, -0.5 * beta - 2.0);
    case Family::CosineMixture: {
      const double g =
          mix_weight * (x[i] * x[j] - dij) * std::exp(-0.5 * sqnorm(x, d));
      const double c =
          (i == j) ? (1.0 - mix_weight) *
                         (-std::cos(x[i] / length_scale) / s2) / d
                   : 0.0;
      return g + c;
    }
  }
  return 0;
}

double CovarianceModel::ktilde(const Vec3& x) const {
  // Deterministic sample of the closed unit ball: cubic lattice at pitch 1/3
  // plus the projections of all lattice directions onto the unit sphere.
  static thread_local std::vector<Vec3> offsets;
  static thread_local int offsets_d = 0;
  if (offsets_d != d) {
    offsets.clear();
    const int reach = 3;
    std::array<int, 3> k{0, 0, 0};
    const int lim1 = reach, lim2 = (d >= 2) ? reach : 0,
              lim3 = (d >= 3) ? reach : 0;
    for (k[0] = -lim1; k[0] <= lim1; ++k[0])
      for (k[1] = -lim2; k[1] <= lim2; ++k[1])
        for (k[2] = -lim3; k[2] <= lim3; ++k[2]) {
          Vec3 v{k[0] / 3.0, k[1] / 3.0, k[2] / 3.0};
          double n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
          if (n2 <= 1.0 + 1e-12) offsets.push_back(v);
          if (n2 > 0) {
            const double inv = 1.0 / std::sqrt(n2);
            offsets.push_back({v[0] * inv, v[1] * inv, v[2] * inv});
          }
        }
    offsets_d = d;
  }
  double best = 0;
  for (const auto& off : offsets) {
    Vec3 y{x[0] + off[0], x[1] + off[1], x[2] + off[2]};
    best = std::max(best, std::abs(eval(y)));
  }
  return best;
}

double CovarianceModel::envelope_c() const {
  if (family != Family::PolyDecay) return 1.0;
  // (1+|x|)^2 <= 2(1+|x|^2) <= 2 max(1,s^2) (1+|x|^2/s^2).
  const double s = length_scale;
  return std::pow(2.0, 0.5 * beta) * std::pow(std::max(1.0, s), beta);
}

double CovarianceModel::lambda2() const {
  const double s2 = length_scale * length_scale;
  switch (family) {
    case Family::BargmannFock: return 1.0 / s2;
    case Family::PolyDecay: return beta / s2;
    case Family::CosineMixture:
      return mix_weight + (1.0 - mix_weight) / (d * s2);
  }
  return 0;
}

nlohmann::json CovarianceModel::to_json() const {
  nlohmann::json p;
  p["length_scale"] = length_scale;
  if (family == Family::PolyDecay) p["beta"] = beta;
  if (family == Family::CosineMixture) p["mix_weight"] = mix_weight;
  return nlohmann::json{{"family", family_name(family)},
                        {"d", d},
                        {"params", p},
                        {"envelopeC", envelope_c()}};
}

CovarianceModel CovarianceModel::from_json(const nlohmann::json& j) {
  CovarianceModel m;
  m.family = family_from_name(j.at("family").get<std::string>());
  m.d = j.at("d").get<int>();
  if (j.contains("params")) {
    const auto& p = j["params"];
    if (p.contains("length_scale")) m.length_scale = p["length_scale"];
    if (p.contains("beta")) m.beta = p["beta"];
    if (p.contains("mix_weight")) m.mix_weight = p["mix_weight"];
  }
  m.validate();
  return m;
}

}  // namespace exclab
