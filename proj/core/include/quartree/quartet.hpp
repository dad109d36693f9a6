#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace quartree {

/// Four distinct leaf indices in strictly increasing order (A < B < C < D).
struct Quartet {
  std::array<std::uint32_t, 4> leaves{};

  std::uint32_t operator[](std::size_t k) const noexcept { return leaves[k]; }
  auto operator<=>(const Quartet&) const = default;

  /// Sorts the indices; throws InvalidArgumentError on duplicates.
  static Quartet of(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d);
};

/// Unrooted topology of a quartet, named by the sibling pairing relative to
/// the sorted positions A < B < C < D.
enum class QuartetTopology : std::uint8_t { AbCd = 0, AcBd = 1, AdBc = 2, Unresolved = 3 };

std::string_view to_string(QuartetTopology t) noexcept;

/// The two sibling pairs (as positions 0..3) of a resolved topology.
std::array<std::array<int, 2>, 2> sibling_positions(QuartetTopology t);

}  // namespace quartree
