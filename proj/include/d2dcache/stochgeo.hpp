#ifndef D2DCACHE_STOCHGEO_HPP
#define D2DCACHE_STOCHGEO_HPP

// Analytical coverage quantities for a Thomas cluster process of D2D devices
// with slotted-ALOHA access and Rayleigh fading, plus the nearest-BS PPP
// coverage. Thermal noise is not modelled.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "d2dcache/core_model.hpp"
#include "d2dcache/errors.hpp"
#include "d2dcache/quadrature.hpp"
#include "d2dcache/special.hpp"

namespace d2dcache {

/// Laplace-domain argument applied to interference measured in units of the
/// D2D transmit power: for a link of length r, s = theta * r^alpha. Applied
/// to interference in watts this is the usual theta r^alpha / P_d.
struct LaplaceArg {
  explicit LaplaceArg(double value) : s(value) {
    if (!(s >= 0.0)) throw InvalidArgument("LaplaceArg: s must be non-negative");
  }
  static LaplaceArg for_link(double theta, double r, double alpha) {
    return LaplaceArg(theta * std::pow(r, alpha));
  }
  double s;
};

enum class CoverageMethod { Analytic, ClosedForm, MonteCarlo };

inline const char* to_string(CoverageMethod m) {
  switch (m) {
    case CoverageMethod::Analytic: return "analytic";
    case CoverageMethod::ClosedForm: return "closed-form";
    case CoverageMethod::MonteCarlo: return "monte-carlo";
  }
  return "?";
}

struct CoverageResult {
  CoverageResult(double v, CoverageMethod m, bool degenerate_flag = false)
      : value(v), method(m), degenerate(degenerate_flag) {
    if (!(value >= 0.0 && value <= 1.0)) {
      std::ostringstream msg;
      msg << "CoverageResult: value " << value << " outside [0, 1]";
      throw NumericFailure(msg.str());
    }
  }
  double value;
  CoverageMethod method;
  bool degenerate;  // no transmission takes place (access_p == 0)
};

namespace detail {

inline quad::Options inner_opts() { return {1e-13, 1e-10, 1'000'000}; }
inline quad::Options outer_opts() { return {1e-12, 1e-9, 1'000'000}; }
inline quad::Options distance_opts() { return {1e-11, 1e-8, 1'000'000}; }

// Gaussian-type tails beyond this many sigma are below 1e-30.
inline constexpr double kTailSigmas = 12.0;

}  // namespace detail

/// Rayleigh density with scale sqrt(2) sigma: the distance between two
/// members of the same cluster.
inline double serving_distance_pdf(double r, double sigma) {
  if (r <= 0.0) return 0.0;
  const double two_var = 2.0 * sigma * sigma;
  return r / two_var * std::exp(-r * r / (2.0 * two_var));
}

/// Rice density of the distance from the origin to a point scattered
/// N(0, sigma^2 I) around a centre at distance v.
inline double rice_pdf(double u, double v, double sigma) {
  if (u <= 0.0) return 0.0;
  const double var = sigma * sigma;
  const double d = u - v;
  return u / var * std::exp(-d * d / (2.0 * var)) * bessel_i0_scaled(u * v / var);
}

/// phi(s, v) = E[s / (s + U^alpha)], U ~ Rice(v, sigma).
inline double inter_cluster_kernel(double s, double v, double sigma, double alpha) {
  if (s == 0.0) return 0.0;
  const double lo = std::max(0.0, v - detail::kTailSigmas * sigma);
  const double hi = v + detail::kTailSigmas * sigma;
  auto f = [&](double u) { return s / (s + std::pow(u, alpha)) * rice_pdf(u, v, sigma); };
  return quad::integrate(f, lo, hi, detail::inner_opts()).value;
}

/// Laplace transform of the aggregate interference from all other clusters,
/// each holding Poisson(access_p * n_bar) active Gaussian-scattered devices.
inline double laplace_inter(LaplaceArg arg, const NetworkConfig& cfg) {
  const double s = arg.s;
  const double active = cfg.access_p * cfg.n_bar;
  if (s == 0.0 || active == 0.0) return 1.0;
  auto outer = [&](double v) {
    const double phi = inter_cluster_kernel(s, v, cfg.sigma, cfg.alpha);
    return -std::expm1(-active * phi) * v;
  };
  const double scale = std::pow(s, 1.0 / cfg.alpha) + detail::kTailSigmas * cfg.sigma;
  const double integral = quad::integrate_to_infinity(outer, 0.0, scale, detail::outer_opts()).value;
  return std::exp(-2.0 * std::numbers::pi * cfg.lambda_p * integral);
}

/// E[s / (s + H^alpha)] for H the intra-cluster Rayleigh(sqrt(2) sigma) distance.
inline double intra_cluster_kernel(double s, double sigma, double alpha) {
  if (s == 0.0) return 0.0;
  auto f = [&](double h) { return s / (s + std::pow(h, alpha)) * serving_distance_pdf(h, sigma); };
  return quad::integrate(f, 0.0, 2.0 * std::numbers::sqrt2 * detail::kTailSigmas * sigma,
                         detail::inner_opts())
      .value;
}

/// Laplace transform of the intra-cluster interference with `intensity`
/// expected active interferers (access_p * n_bar, or access_p * k given k
/// devices), treating their distances to the receiver as independent.
inline double laplace_intra(LaplaceArg arg, double intensity, double sigma, double alpha) {
  if (!(intensity >= 0.0)) throw InvalidArgument("laplace_intra: intensity must be non-negative");
  if (arg.s == 0.0 || intensity == 0.0) return 1.0;
  return std::exp(-intensity * intra_cluster_kernel(arg.s, sigma, alpha));
}

/// Smallest access probability that can carry R0 at the fixed rate log2(1+theta).
inline double access_probability_threshold(double r0_over_w1, double theta) {
  return r0_over_w1 / std::log2(1.0 + theta);
}

/// p* placed a relative `epsilon` above the threshold.
inline double optimal_access_probability(double r0_over_w1, double theta, double epsilon = 1e-6) {
  const double p = access_probability_threshold(r0_over_w1, theta) * (1.0 + epsilon);
  if (!(p <= 1.0)) {
    std::ostringstream msg;
    msg << "R0/W1 = " << r0_over_w1 << " needs access probability " << p << " > 1";
    throw InfeasibleAccessProbability(msg.str());
  }
  return p;
}

namespace detail {

template <class IntraLaplace>
double averaged_over_serving_distance(const NetworkConfig& cfg, IntraLaplace&& intra) {
  auto f = [&](double r) {
    if (r == 0.0) return 0.0;
    const LaplaceArg arg = LaplaceArg::for_link(cfg.theta, r, cfg.alpha);
    return serving_distance_pdf(r, cfg.sigma) * laplace_inter(arg, cfg) * intra(arg);
  };
  const double r_max = 2.0 * std::numbers::sqrt2 * kTailSigmas * cfg.sigma;
  const double v = quad::integrate(f, 0.0, r_max, distance_opts()).value;
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace detail

/// P(R1 > R0): probability that a D2D download from a random cluster member
/// beats the rate threshold, averaged over the serving distance.
inline CoverageResult prob_rate_exceeds(const NetworkConfig& cfg, double r0_over_w1, double w1) {
  cfg.validate();
  if (!(w1 > 0.0)) throw InvalidArgument("prob_rate_exceeds: w1 must be positive");
  if (!(r0_over_w1 >= 0.0)) throw InvalidArgument("prob_rate_exceeds: R0/W1 must be non-negative");
  const double rate = cfg.access_p * w1 * std::log2(1.0 + cfg.theta);
  if (!(rate > r0_over_w1 * w1)) {
    if (cfg.access_p == 0.0 && r0_over_w1 == 0.0) return {1.0, CoverageMethod::Analytic, true};
    std::ostringstream msg;
    msg << "access_p = " << cfg.access_p << " cannot carry R0/W1 = " << r0_over_w1
        << " (needs access_p > " << access_probability_threshold(r0_over_w1, cfg.theta) << ")";
    throw InfeasibleAccessProbability(msg.str());
  }
  const double intensity = cfg.access_p * cfg.n_bar;
  const double v = detail::averaged_over_serving_distance(
      cfg, [&](LaplaceArg a) { return laplace_intra(a, intensity, cfg.sigma, cfg.alpha); });
  return {v, CoverageMethod::Analytic};
}

/// D2D coverage given k devices in the representative cluster, approximating
/// the active intra-cluster interferers as a Gaussian PPP of mean access_p*k.
inline CoverageResult d2d_coverage_conditional(const NetworkConfig& cfg, int k) {
  cfg.validate();
  if (k < 1) throw InvalidArgument("d2d_coverage_conditional: k must be at least 1");
  if (cfg.access_p == 0.0) return {1.0, CoverageMethod::Analytic, true};
  const double intensity = cfg.access_p * k;
  const double v = detail::averaged_over_serving_distance(
      cfg, [&](LaplaceArg a) { return laplace_intra(a, intensity, cfg.sigma, cfg.alpha); });
  return {v, CoverageMethod::Analytic};
}

/// 2F1(1, -delta; 1 - delta; -theta) with delta = 2/alpha, written as
/// 1 + theta^delta * int_{L}^inf du / (1 + u^c), L = theta^-delta, c = alpha/2.
/// The substitution u = L y^{-1/(c-1)} turns the algebraic tail into
/// L/(c-1) * int_0^1 dy / (y^{c/(c-1)} + L^c) on a bounded smooth integrand.
inline double bs_hypergeometric(double theta, double alpha) {
  if (!(theta > 0.0)) throw InvalidArgument("bs_coverage: theta must be positive");
  if (!(alpha > 2.0)) throw InvalidArgument("bs_coverage: alpha must exceed 2");
  if (alpha == 4.0) {
    const double root = std::sqrt(theta);
    return 1.0 + root * std::atan(root);
  }
  const double delta = 2.0 / alpha;
  const double c = alpha / 2.0;
  const double lower = std::pow(theta, -delta);
  const double lower_c = std::pow(lower, c);
  const double power = c / (c - 1.0);
  auto f = [&](double y) { return 1.0 / (std::pow(y, power) + lower_c); };
  const double tail = lower / (c - 1.0) * quad::integrate(f, 0.0, 1.0, {1e-15, 1e-14, 1'000'000}).value;
  return 1.0 + std::pow(theta, delta) * tail;
}

/// Nearest-BS coverage in a PPP of base stations; independent of BS density
/// and transmit power.
inline CoverageResult bs_coverage(double theta, double alpha) {
  return {1.0 / bs_hypergeometric(theta, alpha),
          alpha == 4.0 ? CoverageMethod::ClosedForm : CoverageMethod::Analytic};
}

/// D2D coverage with a single active link per cluster: interferers form one
/// displaced PPP of density lambda_p, serving distance Rayleigh(sqrt(2) sigma).
inline CoverageResult d2d_coverage_single_link(const NetworkConfig& cfg) {
  cfg.validate();
  const double delta = 2.0 / cfg.alpha;
  const double var4 = 4.0 * cfg.sigma * cfg.sigma;
  const double z = std::numbers::pi * cfg.lambda_p * std::pow(cfg.theta, delta) *
                       std::tgamma(1.0 + delta) * std::tgamma(1.0 - delta) +
                   1.0 / var4;
  return {std::min(1.0, 1.0 / (var4 * z)), CoverageMethod::ClosedForm};
}

/// Fixed-rate throughput W log2(1 + theta) P_c in bits/s.
inline double average_rate(double w, double theta, const CoverageResult& coverage) {
  if (!(w >= 0.0)) throw InvalidArgument("average_rate: bandwidth must be non-negative");
  return w * std::log2(1.0 + theta) * coverage.value;
}

}  // namespace d2dcache

#endif
