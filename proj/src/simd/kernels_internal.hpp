#pragma once

#include <cstddef>

namespace atfm::simd {

// Reduction layout shared by every variant.
inline constexpr std::size_t kLanes = 4;

inline double horner_one(const double* c, std::size_t nc, double x) {
  if (nc == 0) return 0.0;
  double r = c[nc - 1];
  for (std::size_t j = nc - 1; j-- > 0;) r = r * x + c[j];
  return r;
}

}  // namespace atfm::simd
