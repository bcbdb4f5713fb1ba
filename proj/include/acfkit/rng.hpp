#pragma once

#include <cstdint>

namespace acfkit {

inline constexpr std::uint64_t kDefaultSeed = 1729;

// SplitMix64 finalizer. Used to derive independent child seeds and as a
// counter-based generator where results must not depend on worker count.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ (stream * 0xD1B54A32D192ED03ULL + 0x632BE59BD9B4E019ULL));
}

// Uniform double in [0, 1) from 53 high bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Stateless stream: draw(i) is the i-th value of stream `key`.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}
  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix64(key_ ^ mix64(counter));
  }
  constexpr double uniform(std::uint64_t counter) const noexcept { return to_unit(bits(counter)); }

 private:
  std::uint64_t key_;
};

}  // namespace acfkit
