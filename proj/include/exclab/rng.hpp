#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace exclab {

// Philox 4x32-10 block cipher (Salmon et al., "Parallel random numbers:
// as easy as 1, 2, 3").
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr,
                                          std::array<uint32_t, 2> key) {
  constexpr uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    const uint64_t p0 = uint64_t(kM0) * ctr[0];
    const uint64_t p1 = uint64_t(kM1) * ctr[2];
    const std::array<uint32_t, 4> nxt = {
        uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], uint32_t(p1),
        uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], uint32_t(p0)};
    ctr = nxt;
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

// Stream roles keep draws for different purposes statistically disjoint.
enum class RngRole : uint32_t {
  FieldNoise = 1,
  Bootstrap = 2,
  Scratch = 3,
};

// Counter-based stream addressed by (master seed, replicate, role, index).
// Draw k is the same value no matter how many workers run or in what order
// replicates finish.
class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t replicate, RngRole role)
      : key_{uint32_t(seed), uint32_t(seed >> 32)},
        hi_{uint32_t(replicate),
            uint32_t(replicate >> 32) ^
                (uint32_t(role) * 0x85EBCA6Bu + 0xC2B2AE35u)} {}

  // Two independent uniforms in (0,1].
  std::array<double, 2> uniform2(uint64_t index) const {
    const auto w = philox4x32(
        {uint32_t(index), uint32_t(index >> 32), hi_[0], hi_[1]}, key_);
    const uint64_t a = (uint64_t(w[0]) << 32) | w[1];
    const uint64_t b = (uint64_t(w[2]) << 32) | w[3];
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    return {double((a >> 11) + 1) * kScale, double((b >> 11) + 1) * kScale};
  }

  double uniform(uint64_t index) const { return uniform2(index)[0]; }

  // Two independent standard normals (Box-Muller).
  std::array<double, 2> normal2(uint64_t index) const {
    const auto u = uniform2(index);
    const double r = std::sqrt(-2.0 * std::log(u[0]));
    const double th = 6.28318530717958647692528676655900577 * u[1];
    return {r * std::cos(th), r * std::sin(th)};
  }

  double normal(uint64_t index) const { return normal2(index)[0]; }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t index, uint64_t n) const {
    const auto w = philox4x32(
        {uint32_t(index), uint32_t(index >> 32), hi_[0], hi_[1]}, key_);
    const uint64_t a = (uint64_t(w[0]) << 32) | w[1];
    return a % n;
  }

 private:
  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 2> hi_;
};

}  // namespace exclab
