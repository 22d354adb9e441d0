#pragma once

#include <cstdint>

namespace gaal {

/// Seeded, splittable random stream (xoshiro256** state, splitmix64 seeding).
/// The same (seed, stream) pair yields the same draw sequence on every
/// platform; independent substreams are derived with child().
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller (own uniforms, no std distributions,
  /// so sequences do not depend on the standard library implementation).
  double normal();

  /// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Derive an independent substream. Pure function of (seed, stream, id):
  /// re-deriving the same child gives the same sequence regardless of how
  /// much the parent has been consumed.
  RngStream child(std::uint64_t id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t state_[4] = {};
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace gaal
