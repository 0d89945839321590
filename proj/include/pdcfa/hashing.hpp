#pragma once

#include <cstddef>
#include <cstdint>

namespace pdcfa {

inline std::size_t hashMix(std::size_t seed, std::size_t v) {
  std::uint64_t x = seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  x ^= x >> 31;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 29;
  return static_cast<std::size_t>(x);
}

}  // namespace pdcfa
