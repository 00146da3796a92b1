#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sievelab {

/// Counter-based generator: every draw is a pure function of (key, counter),
/// so a replicate/coordinate pair always sees the same variate no matter
/// which thread evaluates it or in what order.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(mix(key ^ 0x6a09e667f3bcc909ULL)) {}

  /// Child stream keyed by `tag`; distinct tags give independent streams.
  [[nodiscard]] constexpr CounterRng derive(std::uint64_t tag) const noexcept {
    return CounterRng(raw(), mix(key_ + 0x9e3779b97f4a7c15ULL * (tag + 1)));
  }

  [[nodiscard]] constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix(mix(key_ ^ (counter * 0xd1b54a32d192ed03ULL)) + counter);
  }

  /// Uniform on the open interval (0, 1).
  [[nodiscard]] constexpr double uniform(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on counters 2c and 2c+1.
  [[nodiscard]] double normal(std::uint64_t counter) const noexcept {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  [[nodiscard]] constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  struct raw_tag {};
  constexpr CounterRng(raw_tag, std::uint64_t key) noexcept : key_(key) {}
  static constexpr raw_tag raw() noexcept { return {}; }

  // SplitMix64 finalizer.
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

}  // namespace sievelab
