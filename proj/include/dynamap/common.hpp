#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dynamap {

// Every stochastic component draws from its own named stream so that adding
// or reordering draws in one place never shifts the values seen elsewhere.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t derive_seed(uint64_t base, std::string_view stream, uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ fnv1a(stream)) ^ index);
}

inline std::mt19937_64 make_rng(uint64_t base, std::string_view stream, uint64_t index = 0) {
  return std::mt19937_64(derive_seed(base, stream, index));
}

}  // namespace dynamap
