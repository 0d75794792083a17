#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "triphase/phase.hpp"

namespace triphase {

/// splitmix64 finalizer; good avalanche, cheap.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic stream-splitting: hash a master seed together with an
/// arbitrary tuple of indices (phase pair, repetition, probe, ...) into an
/// independent engine seed. Campaign runs derive their streams this way, so
/// results do not depend on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t w : path) h = splitmix64(h ^ splitmix64(w));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(seed, path));
}

inline double uniform_angle(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, two_pi)(rng);
}

}  // namespace triphase
