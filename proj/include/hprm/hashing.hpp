#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hprm {

// Stable across platforms and runs; std::hash is neither.
constexpr std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based uniform draw in [0, 1) keyed on (seed, key). Same inputs,
/// same draw, regardless of evaluation order or thread count.
inline double keyed_uniform(std::uint64_t seed, std::string_view key) {
  const std::uint64_t h = splitmix64(fnv1a64(key) ^ splitmix64(seed));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::string to_hex(std::uint64_t v);

}  // namespace hprm
