#pragma once

#include <cstdint>

namespace loolsm::random {

/// SplitMix64 finalizer (Steele, Lea & Flood). A bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based stream: every (seed, stream, counter) triple maps to an
/// independent 64-bit word, so any draw can be reproduced without replaying
/// the draws before it. Streams are path indices; counters enumerate the
/// normals a path consumes.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(mix64(seed ^ mix64(stream ^ 0xD1B54A32D192ED03ULL))) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform in the open interval (0, 1) with 53 bits of resolution.
  constexpr double uniform(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
};

/// Inverse of the standard normal CDF (Wichura, AS 241 PPND16; relative error
/// about 1e-16). Requires 0 < p < 1.
double inverse_normal_cdf(double p);

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// 64-bit FNV-1a over a byte string, used for seed derivation.
std::uint64_t hash_string(const char* text, std::uint64_t basis = 0xCBF29CE484222325ULL);

}  // namespace loolsm::random
