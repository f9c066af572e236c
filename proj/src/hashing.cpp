#include "flowtracer/hashing.hpp"

namespace flowtracer {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t state) noexcept {
  for (std::uint8_t b : bytes) {
    state ^= b;
    state *= kFnvPrime;
  }
  return state;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t state) noexcept {
  for (char c : text) {
    state ^= static_cast<std::uint8_t>(c);
    state *= kFnvPrime;
  }
  return state;
}

}  // namespace flowtracer
