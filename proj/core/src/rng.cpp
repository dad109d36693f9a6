#include "quartree/rng.hpp"

#include <cmath>
#include <numbers>

namespace quartree {

__extension__ typedef unsigned __int128 u128;

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) noexcept : key_(mix64(seed ^ 0x6A09E667F3BCC909ULL)), counter_(0) {}

Rng::result_type Rng::operator()() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

Rng Rng::split(std::uint64_t stream_id) const noexcept {
  return Rng(mix64(key_ ^ mix64(stream_id + kGolden)), 0);
}

Rng Rng::split(std::string_view stream_name) const noexcept {
  // FNV-1a
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : stream_name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return split(h);
}

double Rng::uniform() noexcept {
  // 53 random bits, shifted by half an ulp so neither endpoint occurs.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t bound) noexcept {
  // Lemire's nearly-divisionless bounded integer.
  u128 m = static_cast<u128>((*this)()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<u128>((*this)()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() noexcept {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gumbel() noexcept { return -std::log(-std::log(uniform())); }

}  // namespace quartree
