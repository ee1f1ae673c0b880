#pragma once

#include <cstdint>
#include <random>

namespace interpnn {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent child seed from a parent seed and a counter, e.g.
/// derive_seed(base, repetition). Pure function, so any worker can reproduce
/// any stream without coordination.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t counter) {
  return mix64(mix64(parent) ^ mix64(counter + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

} // namespace interpnn
