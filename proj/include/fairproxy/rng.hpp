#pragma once

#include <cstdint>
#include <random>

namespace fairproxy {

// Independent stream seeds from one run seed (splitmix64 finalizer), so
// adding a consumer on one stream never shifts another.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(derive_seed(seed, stream));
}

namespace streams {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t shuffle = 2;
inline constexpr std::uint64_t noise = 3;
inline constexpr std::uint64_t adversary = 4;
inline constexpr std::uint64_t bank = 5;
inline constexpr std::uint64_t audit = 6;
inline constexpr std::uint64_t prior = 7;
inline constexpr std::uint64_t split = 8;
inline constexpr std::uint64_t subsample = 9;
inline constexpr std::uint64_t export_latents = 10;
}  // namespace streams

}  // namespace fairproxy
