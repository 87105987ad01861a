#pragma once

#include <cstdint>
#include <memory>

#include "exclab/grid.hpp"

namespace exclab {

// Circulant embedding sampler. The covariance is wrapped onto a torus
// (doubled per side unless periodic_domain) and diagonalized by the FFT;
// each call synthesizes two independent exact-covariance fields from the
// real and imaginary parts of one complex transform.
class CirculantSampler {
 public:
  CirculantSampler(const CovarianceModel& model, const GridSpec& grid,
                   bool periodic_domain = false, double tau_psd = 1e-9);
  ~CirculantSampler();
  CirculantSampler(const CirculantSampler&) = delete;
  CirculantSampler& operator=(const CirculantSampler&) = delete;

  // Deterministic in (seed, replicate); thread-safe.
  FieldPair sample_pair(uint64_t seed, uint64_t replicate) const;
  FieldSample sample(uint64_t seed, uint64_t replicate) const;

  // Fraction of spectral mass clipped to restore positive semidefiniteness.
  double clipped_mass() const { return clipped_mass_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  double clipped_mass_ = 0.0;
};

}  // namespace exclab
