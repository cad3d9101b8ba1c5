#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ctclust {

using Rng = std::mt19937_64;

/// Phase tags used when deriving streams inside the sampler.
enum class StreamPhase : std::uint64_t {
  Init = 1,
  Latent = 2,
  Gibbs = 3,
  SplitMerge = 4,
  SplitMergePaths = 5,
  RefreshPaths = 6,
  RefreshParams = 7,
  Simulate = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent engine from a master seed and a key path, e.g.
/// (iteration, phase, subject). Streams depend only on the key, never on the
/// order in which they are created, so per-subject work replays identically
/// regardless of thread count or resume point.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return Rng(h);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace ctclust
