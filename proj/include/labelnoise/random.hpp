#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace labelnoise {

/// xoshiro256** 1.0 seeded through splitmix64, so that fixtures can be
/// regenerated bit for bit in any language:
///
///   state[k] = splitmix64(seed)   for k = 0..3 (one shared splitmix64 stream)
///   uniform01()     = (next() >> 11) * 2^-53                      in [0, 1)
///   normal()        = Box-Muller: u1 = ((next() >> 11) + 1) * 2^-53,
///                     u2 = uniform01(), r = sqrt(-2 ln u1);
///                     returns r cos(2 pi u2), then r sin(2 pi u2) on the
///                     following call
///   uniform_index(n)= floor(uniform01() * n)
///
/// Satisfies UniformRandomBitGenerator, but only the members above are used
/// for anything that ends up in a fixture.
class Xoshiro256 {
public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }
  result_type next();

  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::size_t uniform_index(std::size_t n);

private:
  std::uint64_t s_[4];
  std::optional<double> spare_normal_;
};

/// `k` distinct indices from [0, n), by a partial Fisher-Yates shuffle over
/// 0..n-1. The returned order is the draw order.
std::vector<std::size_t> sample_without_replacement(Xoshiro256& rng, std::size_t n, std::size_t k);

/// Full Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(Xoshiro256& rng, std::size_t n);

} // namespace labelnoise
