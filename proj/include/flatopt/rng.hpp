#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace flatopt {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stateless counter-based generator. Every draw is a pure function of
/// (seed, stream, counter), so parallel consumers never share state and any
/// draw can be reproduced in isolation.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(mix64(mix64(seed) ^ mix64(stream * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL))) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key_ ^ mix64(counter * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
  }

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(counter)) * n) >> 64);
  }

  double rademacher(std::uint64_t counter) const noexcept {
    return (bits(counter) >> 63) != 0 ? 1.0 : -1.0;
  }

  /// Standard normal via Box-Muller; draws 2k and 2k+1 share a uniform pair.
  double normal(std::uint64_t index) const noexcept {
    const std::uint64_t pair = index / 2;
    const double u1 = uniform(2 * pair);
    const double u2 = uniform(2 * pair + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (index % 2 == 0) ? r * std::cos(angle) : r * std::sin(angle);
  }

 private:
  std::uint64_t key_;
};

}  // namespace flatopt
