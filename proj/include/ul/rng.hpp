#pragma once

#include <cstdint>
#include <random>

namespace ul {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates nearby (seed, stream) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// Every trial / block of a Monte Carlo loop draws from its own stream, so the
// result does not depend on how the loop is split across threads.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(substream_seed(seed, stream));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace ul
