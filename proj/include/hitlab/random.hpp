#pragma once

#include <cstdint>

namespace hitlab {

// Counter-based bit source. Every random quantity in the library is a pure
// function of (key, index), so results never depend on evaluation order or
// on how work is split between threads.

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Key for item `index` of the named stream `tag` under `seed`.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag,
                                   std::uint64_t index) noexcept {
  return mix64(mix64(seed ^ mix64(tag + 0x9e3779b97f4a7c15ULL)) + index);
}

/// Word `index` of the infinite random stream identified by `key`.
constexpr std::uint64_t random_word(std::uint64_t key, std::uint64_t index) noexcept {
  return mix64(key + (index + 1) * 0x9e3779b97f4a7c15ULL);
}

/// Uniform double in [0,1) with 53 random bits.
constexpr double unit_from_word(std::uint64_t w) noexcept {
  return static_cast<double>(w >> 11) * 0x1p-53;
}

/// Sequential view of a counter stream, for code that wants several draws.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}
  constexpr std::uint64_t next_word() noexcept { return random_word(key_, counter_++); }
  constexpr double next_unit() noexcept { return unit_from_word(next_word()); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stream tags, one per consumer, so that different experiments drawing from
// the same master seed never share randomness.
namespace stream {
inline constexpr std::uint64_t invariant = 1;
inline constexpr std::uint64_t conditioned = 2;
inline constexpr std::uint64_t correlation = 3;
inline constexpr std::uint64_t intersection = 4;
inline constexpr std::uint64_t points = 5;
inline constexpr std::uint64_t pairs = 6;
inline constexpr std::uint64_t birkhoff = 7;
}  // namespace stream

}  // namespace hitlab
