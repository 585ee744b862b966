#pragma once

#include <cstdint>
#include <random>

namespace ofdmsync {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

using Rng = std::mt19937_64;

/// Independent stream for trial `index` under `master_seed`. Depends only on
/// the pair, never on scheduling.
inline Rng trial_rng(std::uint64_t master_seed, std::uint64_t index, std::uint64_t salt = 0) {
  const std::uint64_t s = splitmix64(splitmix64(master_seed ^ splitmix64(salt)) + index);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(salt)};
  return Rng(seq);
}

}  // namespace ofdmsync
