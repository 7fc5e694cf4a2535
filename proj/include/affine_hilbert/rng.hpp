#pragma once

// Deterministic per-path random streams: each (master_seed, path_id) pair
// yields the same sequence regardless of how paths are scheduled across
// threads.

#include <cstdint>
#include <random>

namespace affine_hilbert {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// One Gaussian stream per path. The engine seed is derived by mixing the
/// master seed with the path id, so streams are decorrelated and the full
/// ensemble is reproducible under any execution order.
class PathRng {
 public:
  PathRng(std::uint64_t master_seed, std::uint64_t path_id) {
    std::uint64_t s = master_seed;
    (void)detail::splitmix64(s);
    s ^= detail::splitmix64(s) + path_id * 0xD1B54A32D192ED03ULL;
    seed_ = detail::splitmix64(s);
    engine_.seed(seed_);
  }

  std::uint64_t stream_seed() const { return seed_; }

  double gauss() { return normal_(engine_); }

 private:
  std::uint64_t seed_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace affine_hilbert
