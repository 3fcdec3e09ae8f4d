#pragma once

// Deterministic stream splitting.  Every Monte Carlo replicate draws from its
// own mt19937_64 whose seed is a SplitMix64 hash of (master_seed, stream_tag,
// replicate_index).  Replicates are therefore independent of evaluation order
// and reproducible bit-for-bit across runs.

#include <cstdint>
#include <random>

namespace khmgof {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t stream_tag,
                              std::uint64_t replicate_index) {
  std::uint64_t h = splitmix64(master_seed);
  h = splitmix64(h ^ (0x517cc1b727220a95ULL + stream_tag));
  h = splitmix64(h ^ replicate_index);
  return h;
}

inline std::mt19937_64 replicate_rng(std::uint64_t master_seed, std::uint64_t stream_tag,
                                     std::uint64_t replicate_index) {
  return std::mt19937_64(mix_seed(master_seed, stream_tag, replicate_index));
}

// Uniform on (0,1): 53-bit mantissa, shifted off 0 so inverse-CDF sampling
// never sees an endpoint.
inline double uniform01(std::mt19937_64& gen) {
  const std::uint64_t bits = gen() >> 11;  // top 53 bits
  double u = (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  return u;
}

}  // namespace khmgof
