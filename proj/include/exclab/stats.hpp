#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "exclab/grid.hpp"
#include "exclab/topology.hpp"

namespace exclab {

double normal_cdf(double x);

struct EmpiricalDistribution {
  std::vector<double> values;  // sorted ascending
  static EmpiricalDistribution from(std::vector<double> v);
  int64_t count() const { return int64_t(values.size()); }
};

// Exact sup-distance between the empirical step cdf and a continuous cdf:
// max over sample points of the gap on either side of the jump.
double kolmogorov_distance(const EmpiricalDistribution& sample,
                           const std::function<double(double)>& cdf);

struct Ci {
  double lo = 0, hi = 0;
};

double sample_mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);  // unbiased
Ci mean_ci(const std::vector<double>& xs, double z = 1.959963984540054);
Ci wilson_ci(int64_t successes, int64_t n, double z = 1.959963984540054);
// Chi-square interval for the variance of a normal-ish sample.
Ci variance_ci(const std::vector<double>& xs, double conf = 0.95);

// Gauss-Hermite nodes/weights for int e^{-x^2} f(x) dx (Golub-Welsch).
void gauss_hermite(int n, std::vector<double>& nodes,
                   std::vector<double>& weights);

// Phi(Lambda_R) for each R on nested boxes of one field per replicate.
// values[ri][rep]; geometry is labeled once per replicate.
struct SampleMatrix {
  std::vector<double> Rs;
  std::vector<std::vector<double>> values;
};
SampleMatrix functional_samples(const CovarianceModel& model,
                                const FunctionalSpec& spec,
                                const std::vector<double>& Rs, int N,
                                uint64_t seed, double h, int workers = 0,
                                double buffer = 2.0);

struct CurveRow {
  double R = 0;
  double value = 0;
  Ci ci;
};

// Mean Phi(Lambda_R)/R^d; R list must be increasing. For component-sum
// functionals the interval spans boundary-excluded to boundary-included
// counting (a sandwich for the limit density); for the Euler functional it
// is a plain normal CI of the mean.
std::vector<CurveRow> lln_curve(const CovarianceModel& model,
                                const FunctionalSpec& spec,
                                const std::vector<double>& Rs, int N,
                                uint64_t seed, double h, int workers = 0);
std::vector<CurveRow> lln_curve(const SampleMatrix& samples, int d);

// Var[Phi(Lambda_R)]/R^d with chi-square CIs.
std::vector<CurveRow> variance_curve(const CovarianceModel& model,
                                     const FunctionalSpec& spec,
                                     const std::vector<double>& Rs, int N,
                                     uint64_t seed, double h, int workers = 0);
std::vector<CurveRow> variance_curve(const SampleMatrix& samples, int d);

struct CltRow {
  double R = 0;
  double mean_density = 0;   // mean Phi / R^d
  double var_density = 0;    // Var Phi / R^d
  Ci var_ci;
  double d_kol = 0;          // to N(0, sigma_hat^2)
  Ci d_kol_ci;               // seed-level bootstrap
};

struct CltReport {
  std::vector<CltRow> rows;
  double sigma_hat = 0;  // from the largest R
  double eta_hat = 0;    // -slope of log d_kol vs log R
  Ci eta_ci;
};

// Self-normalized CLT check: Phi~_R = (Phi - mean_R)/R^{d/2} against
// N(0, sigma_hat^2); 200 bootstrap resamples for the d_kol and rate CIs.
CltReport clt_suite(const CovarianceModel& model, const FunctionalSpec& spec,
                    const std::vector<double>& Rs, int N, uint64_t seed,
                    double h, int workers = 0);
CltReport clt_report_from(const SampleMatrix& samples, int d, uint64_t seed,
                          int bootstrap = 200);

// Log-average of F(Phi~_r) over a geometric r-grid for a single nested
// realization, against E[F(sigma Z)]. Centering means and sigma come from an
// auxiliary ensemble built once in the context.
struct AscltContext {
  CovarianceModel model;
  FunctionalSpec spec;
  GridSpec grid;
  std::vector<double> rs;       // geometric grid, ratio 2^{1/4}
  std::vector<double> weights;  // dr/r
  std::vector<double> means;    // E Phi(Lambda_r) estimates
  double sigma_hat = 0;

  static AscltContext build(const CovarianceModel& model,
                            const FunctionalSpec& spec, double R_max,
                            uint64_t seed, double h, int N_mean = 64,
                            int workers = 0);
};

struct AscltResult {
  double value = 0;
  double target = 0;  // E[F(sigma Z)] by Gauss-Hermite quadrature
};

std::vector<AscltResult> asclt_statistic(
    const AscltContext& ctx,
    const std::vector<std::function<double(double)>>& Fs, uint64_t seed,
    int workers = 0);

struct ArmRow {
  double R = 0;
  double p_one = 0;
  Ci one_ci;
  double p_trunc = 0;  // annulus radius R/2
  Ci trunc_ci;
};

std::vector<ArmRow> arm_decay_curve(const CovarianceModel& model, double level,
                                    const std::vector<double>& Rs, int N,
                                    uint64_t seed, double h, int workers = 0);

struct LagCov {
  Vec3 lag{0, 0, 0};
  double cov = 0, se = 0;
};

struct VolumeReport {
  double level = 0;
  double theta = 0;
  Ci theta_ci;
  std::vector<CurveRow> var_curve;   // Var[Vol_inf(Lambda_R)]/R^d
  std::vector<CurveRow> dkol_curve;  // (Vol_inf - theta R^d)/R^{d/2}
  double sigma_vol = 0;              // sd scale from the largest R
  std::vector<LagCov> lag_covs;      // Cov[E_x, E_0] on the half-unit grid
  double sigma2_indicator = 0;       // integral of the lag table
  double cov_e00 = 0;                // must equal theta (1 - theta) exactly
  bool association_ok = true;        // no cov below -3 SE
  double min_pair_z = 0;
  std::vector<CurveRow> cox_grimmett;  // u(k), k in index units
  std::vector<double> lil_n;
  std::vector<double> lil_L;     // L_n for the first run
  double lil_band = 0;           // 3 sigma sqrt(d)
  double lil_exceed_fraction = 0;  // runs with max |L_n| over the band
  double crossing_rate = 0;      // level crossings per unit length (1D
                                 // transects); continuity constant
  bool continuity_ok = true;     // adjacent-lag increments within C dx + 4 SE
};

VolumeReport volume_suite(const CovarianceModel& model, double level,
                          const std::vector<double>& Rs,
                          const std::vector<double>& ns, int N, uint64_t seed,
                          double h, double buffer, int workers = 0,
                          int lil_runs = 100);

}  // namespace exclab
