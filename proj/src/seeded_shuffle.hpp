#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace sdeval::detail {

// std::shuffle and std::uniform_int_distribution are implementation-defined,
// so generated suites would differ between standard libraries. mt19937_64's
// output sequence is fixed by the standard; the rest is done by hand.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace sdeval::detail
