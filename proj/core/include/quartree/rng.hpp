#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace quartree {

/// Counter-based 64-bit generator (SplitMix64 in counter mode).
///
/// Output `k` is a pure function of `(key, k)`, so streams are reproducible
/// across runs, platforms and threads. Independent sub-streams are derived
/// with `split`, which hashes a stream id into a fresh key; components of a
/// pipeline each take their own split instead of sharing one sequence.
///
/// All distributions are implemented here rather than with `<random>`
/// distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Derives an independent stream; does not advance this generator.
  Rng split(std::uint64_t stream_id) const noexcept;
  Rng split(std::string_view stream_name) const noexcept;

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept;
  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Standard normal via Box-Muller.
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }
  /// Standard Gumbel(0, 1): -log(-log u).
  double gumbel() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  Rng(std::uint64_t key, std::uint64_t counter) noexcept : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace quartree
