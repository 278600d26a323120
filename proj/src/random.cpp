#include "labelnoise/random.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <utility>

#include "labelnoise/errors.hpp"

namespace labelnoise {

namespace {

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  for (auto& word : s_) {
    word = splitmix64(seed);
  }
}

Xoshiro256::result_type Xoshiro256::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Xoshiro256::uniform01() { return static_cast<double>(next() >> 11) * kTwoPow53Inv; }

double Xoshiro256::normal() {
  if (spare_normal_) {
    const double z = *spare_normal_;
    spare_normal_.reset();
    return z;
  }
  const double u1 = static_cast<double>((next() >> 11) + 1) * kTwoPow53Inv;
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(angle);
  return r * std::cos(angle);
}

std::size_t Xoshiro256::uniform_index(std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
  return i < n ? i : n - 1;
}

std::vector<std::size_t> sample_without_replacement(Xoshiro256& rng, std::size_t n, std::size_t k) {
  if (k > n) {
    throw ConfigError("cannot draw " + std::to_string(k) + " of " + std::to_string(n) + " items");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::vector<std::size_t> permutation(Xoshiro256& rng, std::size_t n) {
  return sample_without_replacement(rng, n, n);
}

} // namespace labelnoise
