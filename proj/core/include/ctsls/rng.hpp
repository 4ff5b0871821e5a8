#pragma once

#include <cstdint>
#include <limits>

namespace ctsls {

/// splitmix64 finaliser; also used to expand seeds.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Seed of an independent stream: a splitmix64 chain over (master, a, b).
/// Replicate r of a cell uses derive_seed(cell_seed, r).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// xoshiro256** 1.0 (Blackman & Vigna) with splitmix64 seeding. Satisfies
/// UniformRandomBitGenerator. Normal deviates use the Marsaglia polar method
/// so that streams do not depend on the standard library's distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal.
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ctsls
