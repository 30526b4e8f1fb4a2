#ifndef D2DCACHE_SPECIAL_HPP
#define D2DCACHE_SPECIAL_HPP

#include <cmath>
#include <numbers>

namespace d2dcache {

/// e^{-|x|} I_0(x). Finite for every finite x, so products like
/// exp(-(u-v)^2/2s^2) * bessel_i0_scaled(uv/s^2) never form inf * 0.
inline double bessel_i0_scaled(double x) {
  x = std::abs(x);
  if (x <= 16.0) {
    // sum_k (x^2/4)^k / (k!)^2, all terms positive.
    const double y = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
      term *= y / (static_cast<double>(k) * k);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return sum * std::exp(-x);
  }
  // Hankel asymptotic series; at x > 16 the smallest term is far below 1e-16.
  const double inv8x = 1.0 / (8.0 * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * odd * odd * inv8x / k;
    if (next >= term) break;
    term = next;
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

}  // namespace d2dcache

#endif
