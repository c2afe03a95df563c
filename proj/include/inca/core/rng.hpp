#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace inca {

// Derives independent, reproducible seeds for named streams from one root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(root ^ splitmix64(h));
}

inline std::mt19937_64 make_stream(std::uint64_t root, std::string_view name) {
  return std::mt19937_64(stream_seed(root, name));
}

}  // namespace inca
