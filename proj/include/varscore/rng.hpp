#pragma once

#include <cstdint>

namespace varscore {

// Stateless seed derivation: decorrelates streams keyed by (seed, index) so
// shuffles, dropout draws, and repeats stay reproducible under any schedule.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace varscore
