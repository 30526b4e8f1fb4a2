#ifndef D2DCACHE_QUADRATURE_HPP
#define D2DCACHE_QUADRATURE_HPP

// Globally adaptive Gauss-Kronrod (7/15) quadrature on finite and
// semi-infinite ranges, plus the bracketed scalar root finder shared by the
// optimizers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

#include "d2dcache/errors.hpp"

namespace d2dcache::quad {

struct Options {
  double abs_tol = 1e-9;
  double rel_tol = 1e-7;
  std::size_t max_evals = 1'000'000;
};

struct Result {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t evals = 0;
  std::size_t intervals = 0;
};

namespace detail {

// Kronrod abscissae on [-1, 1]; odd indices (1, 3, 5) and the centre (7) are
// shared with the 7-point Gauss rule.
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment kronrod15(F& f, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(centre);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const double sum = f(centre - dx) + f(centre + dx);
    kronrod += kKronrodWeights[j] * sum;
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * sum;
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/// Integrates f over [a, b]. Throws NumericFailure if the evaluation budget
/// runs out before the error estimate meets max(abs_tol, rel_tol*|I|).
template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
  if (a == b) return {};
  if (a > b) {
    Result r = integrate(f, b, a, opt);
    r.value = -r.value;
    return r;
  }
  std::priority_queue<detail::Segment> heap;
  std::vector<detail::Segment> frozen;  // too narrow to split further
  auto first = detail::kronrod15(f, a, b);
  heap.push(first);
  std::size_t evals = 15;
  double value = first.value;
  double error = first.error;

  auto target = [&] { return std::max(opt.abs_tol, opt.rel_tol * std::abs(value)); };

  while (error > target() && !heap.empty()) {
    if (evals + 30 > opt.max_evals) {
      std::ostringstream msg;
      msg << "quadrature on [" << a << ", " << b << "] did not converge: estimate " << value
          << ", error " << error << " after " << evals << " evaluations";
      throw NumericFailure(msg.str());
    }
    auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      frozen.push_back(worst);
      continue;
    }
    auto left = detail::kronrod15(f, worst.a, mid);
    auto right = detail::kronrod15(f, mid, worst.b);
    evals += 30;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }

  // Re-sum to shed the drift of the running updates.
  Result out;
  out.evals = evals;
  out.intervals = heap.size() + frozen.size();
  while (!heap.empty()) {
    out.value += heap.top().value;
    out.abs_error += heap.top().error;
    heap.pop();
  }
  for (const auto& s : frozen) {
    out.value += s.value;
    out.abs_error += s.error;
  }
  return out;
}

/// Integrates f over [a, inf) through x = a + scale * t / (1 - t), t in [0, 1).
/// `scale` should be of the order of the integrand's decay length.
template <class F>
Result integrate_to_infinity(F&& f, double a, double scale, const Options& opt = {}) {
  auto mapped = [&](double t) {
    if (t >= 1.0) return 0.0;
    const double one_minus = 1.0 - t;
    const double x = a + scale * t / one_minus;
    if (!std::isfinite(x)) return 0.0;
    const double fx = f(x);
    return fx == 0.0 ? 0.0 : fx * scale / (one_minus * one_minus);
  };
  return integrate(mapped, 0.0, 1.0, opt);
}

/// Root of a function that changes sign on [lo, hi], by bisection. The sign
/// at `lo` decides orientation, so either monotone direction works.
template <class F>
double bisect(F&& f, double lo, double hi, double x_tol = 1e-12, int max_iter = 200) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  const bool lo_negative = flo < 0.0;
  for (int it = 0; it < max_iter && (hi - lo) > x_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == lo_negative) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace d2dcache::quad

#endif
