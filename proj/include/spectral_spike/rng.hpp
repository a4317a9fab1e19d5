#pragma once

// Deterministic random stream used for data simulation and probe sampling.
//
// Generator: xoshiro256++ (Blackman & Vigna), state expanded from a 64-bit
// seed with splitmix64.  Uniforms take the top 53 bits; normals come from
// Box-Muller pairs (no rejection step), so a stream consumes a fixed number
// of generator words per request and output is bitwise reproducible for a
// given seed on any IEEE-754 double platform.

#include <cmath>
#include <cstdint>

namespace spectral_spike {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64_next(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1): 53-bit mantissa.
  double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]: never zero, safe under log().
  double uniform01_open_below() {
    return double((next() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; pairs are cached so consecutive calls
  // consume exactly one generator pair per two normals.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01_open_below();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // +1 or -1 with equal probability (top bit of the next word).
  double rademacher() { return (next() >> 63) ? -1.0 : 1.0; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace spectral_spike
