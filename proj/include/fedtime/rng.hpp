#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fedtime {

/// SplitMix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic random stream. The mt19937_64 engine is fully specified by
/// the standard; the distributions below are hand-rolled because the std::
/// distribution objects are implementation-defined and would break
/// byte-identical trace reproduction across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(mix64(seed)) {}
  Rng(std::uint64_t seed, std::uint64_t stream)
      : eng_(mix64(mix64(seed) ^ mix64(stream ^ 0x5bf0a8b1a8b1c953ULL))) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform integer in [0, n). Rejection keeps it unbiased.
  std::size_t uniform_below(std::size_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % n);
  }

  /// Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform_below(static_cast<std::size_t>(hi - lo + 1)));
  }

  /// Standard normal via Box-Muller; one spare kept between calls.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Stream key for the mini-batch draws of one coordination round: the batch
/// sequence depends only on (seed, device, round), never on event execution
/// order, so sync and async replays sample identically.
inline Rng round_stream(std::uint64_t seed, int device_index, long long round) {
  const std::uint64_t stream =
      (static_cast<std::uint64_t>(device_index) << 40) ^ static_cast<std::uint64_t>(round);
  return Rng(seed, stream);
}

}  // namespace fedtime
