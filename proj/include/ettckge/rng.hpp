#pragma once

#include <cstdint>
#include <random>

namespace ettckge {

// splitmix64, used to mix (seed, context ids) into independent engine seeds so
// every batch / stage / snapshot owns its own deterministic stream.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0, std::uint64_t c = 0,
                              std::uint64_t d = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  h = splitmix64(h ^ d);
  return h;
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t a,
                                   std::uint64_t b = 0, std::uint64_t c = 0,
                                   std::uint64_t d = 0) {
  return std::mt19937_64(mix_seed(seed, a, b, c, d));
}

}  // namespace ettckge
