#pragma once

#include <cstdint>
#include <random>

namespace qnipm {

// std::uniform_*_distribution output is implementation-defined; these
// helpers keep generated instances byte-identical across platforms.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform01(g);
}

inline std::uint64_t uniform_index(std::mt19937_64& g, std::uint64_t bound) {
  return g() % bound;  // modulo bias is irrelevant at desk scale
}

}  // namespace qnipm
