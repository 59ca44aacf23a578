#pragma once

#include <cstdint>
#include <random>

namespace sensekern {

// SplitMix64 finaliser; mixes a seed and a stream key into an engine seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (key + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Engine output is fixed by the standard; the helpers below avoid the
// implementation-defined std:: distributions so draws are portable.
using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t key = 0) {
  return Engine(mix_seed(seed, key));
}

// Uniform double in [0, 1).
inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, bound), bound > 0 (Lemire's multiply-shift with rejection).
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
  unsigned __int128 m = static_cast<unsigned __int128>(eng()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(eng()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace sensekern
