#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tglab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the index-th independent stream of a run. Lets parallel workers
/// draw sample k without replaying samples 0..k-1.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// mt19937_64 with hand-rolled real mapping. The std distributions are
/// implementation-defined, which would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t index) : eng_(stream_seed(seed, index)) {}

  std::uint64_t next() { return eng_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::mt19937_64 eng_;
};

/// Sample values are snapped down to multiples of 2^-32. With |x| < 2^20 every
/// sum and halving the models perform stays exact in binary64.
inline constexpr double kLatticeScale = 4294967296.0;

inline double snap_to_lattice(double v) { return std::floor(v * kLatticeScale) / kLatticeScale; }

}  // namespace tglab
