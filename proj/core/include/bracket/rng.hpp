#pragma once

#include <cmath>
#include <cstdint>

namespace bracket::rng {

/// splitmix64 finalizer: bijective 64-bit mixing function.
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

/**
 * Deterministic counter-based random stream.
 *
 * A stream is fully determined by (seed, stream_id); construction is O(1),
 * so per-unit / per-replicate streams are cheap. Consumers that assign one
 * stream per independent work item get bit-identical results regardless of
 * evaluation order or thread count, which is the project-wide determinism
 * contract. The generator is splitmix64 (full 2^64 period per stream).
 */
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : state_(mix64(seed ^ mix64(stream_id * 0x9E3779B97F4A7C15ull + 1))) {}

  std::uint64_t next_u64() noexcept {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix64(state_);
  }

  /// Uniform double in the open interval (0, 1).
  double next_unit() noexcept {
    // 53 random bits; +0.5 offset keeps the value strictly inside (0,1).
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes two uniforms per pair.
  double next_normal() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;  // 2*pi*u2
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double next_normal(double mean, double sd) noexcept {
    return mean + sd * next_normal();
  }

  bool next_bernoulli(double p) noexcept { return next_unit() < p; }

  /// Uniform integer in [0, n); n must be >= 1. Multiply-shift mapping:
  /// deterministic and unbiased to within 2^-64, sufficient for resampling.
  std::uint64_t next_below(std::uint64_t n) noexcept {
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
    return static_cast<std::uint64_t>(wide >> 64);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace bracket::rng
