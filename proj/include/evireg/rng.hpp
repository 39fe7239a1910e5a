#pragma once

#include <cstdint>
#include <vector>

namespace evireg {

/// splitmix64 step; used to expand a user seed into generator state.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// PCG32 (XSH-RR 64/32) with splitmix64 seeding. The output stream for a
/// given seed is part of the project's reproducibility contract, so this
/// deliberately does not use <random> distributions, whose algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  [[nodiscard]] std::uint32_t next_u32() noexcept;
  [[nodiscard]] std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  [[nodiscard]] double uniform() noexcept;
  /// Uniform on (0, 1), never returns 0.
  [[nodiscard]] double uniform_open() noexcept;
  [[nodiscard]] double uniform(double lo, double hi) noexcept;
  /// Uniform integer in [0, bound) without modulo bias.
  [[nodiscard]] std::uint32_t below(std::uint32_t bound) noexcept;

  /// Standard normal via Box-Muller; the second variate is cached.
  [[nodiscard]] double normal() noexcept;
  [[nodiscard]] double normal(double mean, double stddev) noexcept;

  /// Gamma(shape, scale=1) via Marsaglia-Tsang. shape > 0.
  [[nodiscard]] double gamma(double shape);

  /// Fisher-Yates permutation of [0, n).
  [[nodiscard]] std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace evireg
