#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lofi {

/// Seeded random source used by every stochastic operation.
///
/// The stream is fully specified so runs are reproducible across standard
/// library implementations:
///  - bits: std::mt19937_64 seeded with the 64-bit seed;
///  - uniform(): (bits >> 11 + 0.5) * 2^-53, strictly inside (0, 1);
///  - normal(): Box-Muller on two uniforms, returning the cosine branch first
///    and caching the sine branch for the next call;
///  - below(m): rejection sampling on the top bits, unbiased.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t bits() { return engine_(); }
  double uniform();
  double normal();
  std::uint64_t below(std::uint64_t m);

  /// Independent child stream derived from (seed, stream) via splitmix64.
  Rng fork(std::uint64_t stream) const;

  /// Uniform random permutation of 0..n-1 (Fisher-Yates, descending).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace lofi
