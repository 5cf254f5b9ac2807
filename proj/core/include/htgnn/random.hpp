#pragma once

// Seeded sampling helpers with results that do not depend on the standard
// library's distribution implementations.

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace htgnn {

double uniform01(std::mt19937_64& rng);

// Uniform integer in [0, n) by rejection; n must be positive.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

// Standard normal via Box-Muller.
double standard_normal(std::mt19937_64& rng);

// Independent stream for (seed, stream) via splitmix64.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

template <typename T>
void shuffle_in_place(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

}  // namespace htgnn
