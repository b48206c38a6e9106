#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace patx {

// splitmix64; used to derive independent per-phase / per-sample seeds from
// one global seed so every stage is reproducible on its own.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view tag) {
  return splitmix64(global_seed ^ fnv1a64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view tag, std::uint64_t index) {
  return splitmix64(splitmix64(global_seed ^ fnv1a64(tag)) + index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

std::uint32_t crc32(const void* data, std::size_t n, std::uint32_t seed = 0);

}  // namespace patx
