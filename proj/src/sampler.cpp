#include "exclab/sampler.hpp"

#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "exclab/errors.hpp"
#include "exclab/rng.hpp"

namespace exclab {

namespace {
// FFTW planning is not thread-safe; execution with the new-array API is.
std::mutex g_fftw_mutex;
}  // namespace

struct CirculantSampler::Impl {
  CovarianceModel model;
  GridSpec grid;
  bool periodic = false;
  int m = 0;        // torus nodes per side
  int64_t mtot = 0; // torus nodes total
  std::vector<double> amp;  // sqrt(lambda_k / mtot)
  fftw_plan plan = nullptr;
  fftw_complex* planbuf = nullptr;

  ~Impl() {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    if (plan) fftw_destroy_plan(plan);
    if (planbuf) fftw_free(planbuf);
  }
};

CirculantSampler::CirculantSampler(const CovarianceModel& model,
                                   const GridSpec& grid, bool periodic_domain,
                                   double tau_psd)
    : impl_(new Impl) {
  model.validate();
  grid.validate();
  impl_->model = model;
  impl_->grid = grid;
  impl_->periodic = periodic_domain;
  const int n = grid.n();
  const int m = periodic_domain ? n : 2 * n;
  impl_->m = m;
  int64_t mtot = 1;
  for (int a = 0; a < grid.d; ++a) mtot *= m;
  impl_->mtot = mtot;

  // Covariance on the torus at wrapped lag distances.
  std::vector<std::complex<double>> buf(static_cast<size_t>(mtot));
  const int m1 = (grid.d >= 2) ? m : 1;
  const int m2 = (grid.d >= 3) ? m : 1;
  auto wrap = [&](int k) { return (k <= m / 2) ? k : k - m; };
  for (int k2 = 0; k2 < m2; ++k2)
    for (int k1 = 0; k1 < m1; ++k1)
      for (int k0 = 0; k0 < m; ++k0) {
        Vec3 x{wrap(k0) * grid.h, wrap(k1) * grid.h, wrap(k2) * grid.h};
        const int64_t idx = (int64_t(k2) * m1 + k1) * m + k0;
        buf[size_t(idx)] = model.eval(x);
      }

  {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    impl_->planbuf = fftw_alloc_complex(size_t(mtot));
    int dims[3] = {m, m, m};
    impl_->plan = fftw_plan_dft(
        grid.d, dims, impl_->planbuf, impl_->planbuf, FFTW_FORWARD,
        FFTW_ESTIMATE);
  }
  // Eigenvalues = forward DFT of the wrapped kernel (real by symmetry).
  auto* pb = reinterpret_cast<std::complex<double>*>(impl_->planbuf);
  for (int64_t i = 0; i < mtot; ++i) pb[i] = buf[size_t(i)];
  fftw_execute(impl_->plan);

  double lam_max = 0, neg_mass = 0, abs_mass = 0;
  impl_->amp.resize(size_t(mtot));
  for (int64_t i = 0; i < mtot; ++i) {
    const double lam = pb[i].real();
    lam_max = std::max(lam_max, lam);
    abs_mass += std::abs(lam);
    if (lam < 0) neg_mass += -lam;
  }
  double lam_min = 0;
  for (int64_t i = 0; i < mtot; ++i)
    lam_min = std::min(lam_min, pb[i].real());
  if (lam_min < -tau_psd * lam_max)
    throw EmbeddingNotPSD(
        "most negative embedding eigenvalue " + std::to_string(lam_min) +
        " below -tau_psd * " + std::to_string(lam_max));
  clipped_mass_ = (abs_mass > 0) ? neg_mass / abs_mass : 0.0;
  for (int64_t i = 0; i < mtot; ++i)
    impl_->amp[size_t(i)] =
        std::sqrt(std::max(0.0, pb[i].real()) / double(mtot));
}

CirculantSampler::~CirculantSampler() = default;

FieldPair CirculantSampler::sample_pair(uint64_t seed,
                                        uint64_t replicate) const {
  const GridSpec& g = impl_->grid;
  const int n = g.n(), m = impl_->m;
  const int64_t mtot = impl_->mtot;

  fftw_complex* raw;
  {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    raw = fftw_alloc_complex(size_t(mtot));
  }
  auto* z = reinterpret_cast<std::complex<double>*>(raw);

  const CounterRng rng(seed, replicate, RngRole::FieldNoise);
  for (int64_t i = 0; i < mtot; ++i) {
    const auto nrm = rng.normal2(uint64_t(i));
    z[i] = impl_->amp[size_t(i)] * std::complex<double>(nrm[0], nrm[1]);
  }
  fftw_execute_dft(impl_->plan, raw, raw);

  FieldPair out;
  for (FieldSample* fs : {&out.f, &out.f_tilde}) {
    fs->grid = g;
    fs->model = impl_->model;
    fs->seed = seed;
    fs->replicate = replicate;
    fs->values.resize(size_t(g.ncells()));
  }
  const int n1 = (g.d >= 2) ? n : 1;
  const int n2 = (g.d >= 3) ? n : 1;
  const int m1 = (g.d >= 2) ? m : 1;
  for (int k2 = 0; k2 < n2; ++k2)
    for (int k1 = 0; k1 < n1; ++k1)
      for (int k0 = 0; k0 < n; ++k0) {
        const int64_t src = (int64_t(k2) * m1 + k1) * m + k0;
        const int64_t dst = (int64_t(k2) * n1 + k1) * n + k0;
        out.f.values[size_t(dst)] = z[src].real();
        out.f_tilde.values[size_t(dst)] = z[src].imag();
      }
  {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    fftw_free(raw);
  }
  return out;
}

FieldSample CirculantSampler::sample(uint64_t seed, uint64_t replicate) const {
  return sample_pair(seed, replicate).f;
}

}  // namespace exclab
