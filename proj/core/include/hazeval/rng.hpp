#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace hazeval {

// mt19937_64 output is fixed by the standard; the distributions are not, so
// all sampling goes through these helpers to keep datasets identical across
// standard library implementations.
using Rng = std::mt19937_64;

// Unbiased integer in [0, n) by rejection sampling. n must be > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

// Uniform real in [0, 1) with 53 bits of mantissa.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[uniform_index(rng, items.size())];
}

template <class T>
void shuffle(Rng& rng, std::vector<T>& items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

}  // namespace hazeval
