#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace flowtracer {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t state = kFnvOffsetBasis) noexcept;
std::uint64_t fnv1a64(std::string_view text, std::uint64_t state = kFnvOffsetBasis) noexcept;

/// SplitMix64 finalizer; a bijective avalanche mix.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

}  // namespace flowtracer
