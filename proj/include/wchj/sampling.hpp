#pragma once

#include <cstdint>

namespace wchj {

/// Radical inverse of `index` in `base`; the Halton sequence in [0,1).
inline double halton(std::uint64_t index, unsigned base) {
  double f = 1.0;
  double r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

/// Bases for the first few Halton coordinates.
inline constexpr unsigned kHaltonBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43};

}  // namespace wchj
