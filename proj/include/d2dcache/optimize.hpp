#ifndef D2DCACHE_OPTIMIZE_HPP
#define D2DCACHE_OPTIMIZE_HPP

// Caching-probability optimizers:
//   * offloading gain   -- concave, KKT water-filling over b
//   * energy per cluster -- convex when P_b/R_2 > P_d/R_1, KKT with a closed
//     form per file
//   * weighted delay    -- block coordinate descent between the closed-form
//     bandwidth split and a barrier solve of the caching subproblem

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "d2dcache/core_model.hpp"
#include "d2dcache/errors.hpp"
#include "d2dcache/quadrature.hpp"
#include "d2dcache/queueing.hpp"
#include "d2dcache/stochgeo.hpp"

namespace d2dcache {

struct KktSolution {
  CachingPolicy policy;
  double multiplier = 0.0;  // v*, the price of one unit of cache
  double objective = 0.0;
  int iterations = 0;
  double slackness_residual = 0.0;
  bool degenerate = false;
};

namespace detail {

struct WaterFill {
  std::vector<double> b;
  double level = 0.0;
  int iterations = 0;
};

// Finds the level v at which sum_i response(i, v) = m, where each response is
// non-increasing in v and takes values in [0, 1]. Where several files share a
// flat stretch at the final level, the two bracketing responses are blended
// so the sum is met exactly.
template <class Response>
WaterFill water_fill(std::size_t n, double m, double v_lo, double v_hi, Response&& response) {
  auto evaluate = [&](double v, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = response(i, v);
    return stable_sum(out);
  };
  std::vector<double> lo_b(n), hi_b(n);
  double lo_sum = evaluate(v_lo, lo_b);
  double hi_sum = evaluate(v_hi, hi_b);
  if (lo_sum < m || hi_sum > m) throw NumericFailure("water_fill: level bracket does not straddle the capacity");

  WaterFill out;
  std::vector<double> mid_b(n);
  for (; out.iterations < 200; ++out.iterations) {
    const double v = 0.5 * (v_lo + v_hi);
    if (!(v > v_lo && v < v_hi)) break;
    const double s = evaluate(v, mid_b);
    if (s >= m) {
      v_lo = v;
      lo_sum = s;
      lo_b.swap(mid_b);
    } else {
      v_hi = v;
      hi_sum = s;
      hi_b.swap(mid_b);
    }
    if (lo_sum == m) {
      hi_b = lo_b;
      hi_sum = lo_sum;
      break;
    }
  }
  const double w = lo_sum > hi_sum ? (m - hi_sum) / (lo_sum - hi_sum) : 0.0;
  out.b.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.b[i] = std::clamp(hi_b[i] + w * (lo_b[i] - hi_b[i]), 0.0, 1.0);
  out.level = 0.5 * (v_lo + v_hi);

  // Put the last few ulps of the sum on a file with room to move.
  for (int pass = 0; pass < 4; ++pass) {
    const double excess = stable_sum(out.b) - m;
    if (excess == 0.0) break;
    for (std::size_t i = 0; i < n; ++i) {
      const double moved = std::clamp(out.b[i] - excess, 0.0, 1.0);
      if (moved != out.b[i]) {
        out.b[i] = moved;
        break;
      }
    }
  }
  return out;
}

// Largest violation of stationarity/complementary slackness given the
// marginal gain of each file at its chosen b and the level v.
template <class Marginal>
double slackness_residual(std::span<const double> b, double v, Marginal&& marginal) {
  double worst = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double g = marginal(i, b[i]) - v;
    double r = 0.0;
    if (b[i] >= 1.0) {
      r = std::max(0.0, -g);  // the upper-bound multiplier g must be >= 0
    } else if (b[i] <= 0.0) {
      r = std::max(0.0, g);
    } else {
      r = std::abs(g);
    }
    worst = std::max(worst, r);
  }
  return worst;
}

}  // namespace detail

// ---------------------------------------------------------------- offloading

/// P_o(b) = sum_i q_i b_i + q_i (1 - b_i)(1 - e^{-n_bar b_i}) P(R1 > R0).
/// Evaluates any b, feasible or not.
inline double objective_offloading(std::span<const double> b, const ContentLibrary& lib, double n_bar,
                                   double prob_r1) {
  double total = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double q = lib.popularity(i);
    total += q * b[i] + q * (1.0 - b[i]) * (-std::expm1(-b[i] * n_bar)) * prob_r1;
  }
  return total;
}

/// d P_o / d b_i.
inline double offloading_marginal(double q, double b, double n_bar, double prob_r1) {
  const double e = std::exp(-n_bar * b);
  return q + q * (n_bar * (1.0 - b) * e - (1.0 - e)) * prob_r1;
}

/// Maximizes the offloading gain over {0 <= b <= 1, sum b = M} for a given
/// P(R1 > R0). Files saturate at 1 below the level q(1 - (1 - e^{-n_bar})P),
/// drop to 0 above q(1 + n_bar P), and otherwise solve marginal(b) = v.
inline KktSolution optimize_offloading(const NetworkConfig& cfg, const ContentLibrary& lib, double prob_r1) {
  if (!(prob_r1 >= 0.0 && prob_r1 <= 1.0))
    throw InvalidArgument("optimize_offloading: P(R1 > R0) must lie in [0, 1]");
  const std::size_t n = lib.n_files();
  const double m = static_cast<double>(lib.cache_size());
  if (lib.cache_size() >= n) throw InvalidArgument("optimize_offloading: M must be below N_f");
  const double nb = cfg.n_bar;

  auto response = [&](std::size_t i, double v) {
    const double q = lib.popularity(i);
    if (v <= offloading_marginal(q, 1.0, nb, prob_r1)) return 1.0;
    if (v >= offloading_marginal(q, 0.0, nb, prob_r1)) return 0.0;
    return quad::bisect([&](double b) { return offloading_marginal(q, b, nb, prob_r1) - v; }, 0.0, 1.0, 1e-15);
  };
  double v_hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) v_hi = std::max(v_hi, lib.popularity(i) * (1.0 + nb * prob_r1));
  auto fill = detail::water_fill(n, m, 0.0, v_hi, response);

  const double residual = detail::slackness_residual(fill.b, fill.level, [&](std::size_t i, double b) {
    return offloading_marginal(lib.popularity(i), b, nb, prob_r1);
  });
  const double objective = objective_offloading(fill.b, lib, nb, prob_r1);
  return {CachingPolicy(std::move(fill.b), lib.cache_size()), fill.level, objective, fill.iterations, residual,
          false};
}

// -------------------------------------------------------------------- energy

namespace detail {

inline void require_energy_rates(double r1, double r2) {
  if (!(r1 > 0.0) || !(r2 > 0.0)) throw InvalidArgument("energy: rates R1 and R2 must be positive");
}

}  // namespace detail

/// Energy spent serving one request from each of the k devices in a cluster:
/// k sum_i q_i S_i [ (1-b_i)(1-(1-b_i)^{k-1}) P_d/R_1 + (1-b_i)^k P_b/R_2 ].
/// Sizes in bits, rates in bits/s, result in joules.
inline double energy_conditional(std::span<const double> b, const ContentLibrary& lib, const NetworkConfig& cfg,
                                 int k, double r1, double r2) {
  if (k < 0) throw InvalidArgument("energy_conditional: k must be non-negative");
  detail::require_energy_rates(r1, r2);
  if (k == 0) return 0.0;
  const double d2d = cfg.p_d / r1;
  const double bs = cfg.p_b / r2;
  double total = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double miss = 1.0 - b[i];
    const double by_bs = std::pow(miss, k);
    const double by_d2d = miss * (1.0 - std::pow(miss, k - 1));
    total += lib.popularity(i) * lib.size_bits(i) * (by_d2d * d2d + by_bs * bs);
  }
  return k * total;
}

/// Diagonal of the Hessian of energy_conditional, k^2 (k-1) q_i S_i
/// (P_b/R_2 - P_d/R_1)(1-b_i)^{k-2}. The Hessian has no off-diagonal terms.
inline std::vector<double> energy_hessian_diagonal(std::span<const double> b, const ContentLibrary& lib,
                                                   const NetworkConfig& cfg, int k, double r1, double r2) {
  detail::require_energy_rates(r1, r2);
  std::vector<double> h(b.size(), 0.0);
  if (k < 2) return h;
  const double gap = cfg.p_b / r2 - cfg.p_d / r1;
  for (std::size_t i = 0; i < b.size(); ++i) {
    h[i] = static_cast<double>(k) * k * (k - 1) * lib.popularity(i) * lib.size_bits(i) * gap *
           std::pow(1.0 - b[i], k - 2);
  }
  return h;
}

/// Minimizes energy_conditional for a cluster of k devices. With
/// a = P_d/R_1 and c = P_b/R_2 the per-file optimum at level v is
///   b_i = [1 - ((v - k q_i S_i a) / (k^2 q_i S_i (c - a)))^{1/(k-1)}], clipped to [0, 1].
inline KktSolution optimize_energy(const NetworkConfig& cfg, const ContentLibrary& lib, int k, double r1,
                                   double r2) {
  detail::require_energy_rates(r1, r2);
  if (k < 1) throw InvalidArgument("optimize_energy: k must be at least 1");
  const double a = cfg.p_d / r1;
  const double c = cfg.p_b / r2;
  if (!(c > a)) {
    std::ostringstream msg;
    msg << "energy objective not convex: P_b/R_2 = " << c << " <= P_d/R_1 = " << a;
    throw ConvexityViolated(msg.str());
  }
  if (k == 1) {
    // Nobody to share with: every miss goes to the BS, so cache the top M.
    auto policy = baseline_policy(BaselineKind::Cpf, lib);
    const double objective = energy_conditional(policy.values(), lib, cfg, k, r1, r2);
    return {std::move(policy), 0.0, objective, 0, 0.0, true};
  }
  const std::size_t n = lib.n_files();
  const double kd = static_cast<double>(k);
  auto marginal = [&](std::size_t i, double b) {
    const double qs = lib.popularity(i) * lib.size_bits(i);
    return kd * qs * a + kd * kd * qs * (c - a) * std::pow(1.0 - b, k - 1);
  };
  auto response = [&](std::size_t i, double v) {
    const double qs = lib.popularity(i) * lib.size_bits(i);
    const double floor = kd * qs * a;
    if (v <= floor) return 1.0;
    const double ratio = (v - floor) / (kd * kd * qs * (c - a));
    if (ratio >= 1.0) return 0.0;
    return std::clamp(1.0 - std::pow(ratio, 1.0 / (kd - 1.0)), 0.0, 1.0);
  };
  double v_hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) v_hi = std::max(v_hi, marginal(i, 0.0));
  auto fill = detail::water_fill(n, static_cast<double>(lib.cache_size()), 0.0, v_hi, response);
  const double residual = detail::slackness_residual(fill.b, fill.level, marginal);
  const double objective = energy_conditional(fill.b, lib, cfg, k, r1, r2);
  return {CachingPolicy(std::move(fill.b), lib.cache_size()), fill.level, objective, fill.iterations,
          residual, false};
}

/// Poisson(n_bar) weights P(n = k) for k = 0..k_max, cut where the remaining
/// tail mass drops below 1e-10.
inline std::vector<double> cluster_size_weights(double n_bar) {
  std::vector<double> w;
  if (n_bar <= 0.0) return {1.0};
  double mass = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double p = std::exp(k * std::log(n_bar) - n_bar - std::lgamma(k + 1.0));
    w.push_back(p);
    mass += p;
    if (k > n_bar && 1.0 - mass < 1e-10) break;
  }
  return w;
}

/// E_av = sum_k E(b | k) P(n = k) with Poisson(n_bar) cluster sizes.
inline double average_energy(std::span<const double> b, const ContentLibrary& lib, const NetworkConfig& cfg,
                             double r1, double r2) {
  const auto w = cluster_size_weights(cfg.n_bar);
  double total = 0.0;
  for (std::size_t k = 1; k < w.size(); ++k) {
    total += w[k] * energy_conditional(b, lib, cfg, static_cast<int>(k), r1, r2);
  }
  return total;
}

/// Minimizes average_energy over the caching polytope. Each file's cost is
/// a Poisson mixture of the conditional costs, still convex and separable,
/// so the same water-filling applies with a numeric per-file inverse.
inline KktSolution optimize_average_energy(const NetworkConfig& cfg, const ContentLibrary& lib, double r1,
                                           double r2) {
  detail::require_energy_rates(r1, r2);
  const double a = cfg.p_d / r1;
  const double c = cfg.p_b / r2;
  if (!(c > a)) throw ConvexityViolated("average energy objective not convex: P_b/R_2 <= P_d/R_1");
  const auto w = cluster_size_weights(cfg.n_bar);
  double linear = 0.0;
  for (std::size_t k = 1; k < w.size(); ++k) linear += w[k] * static_cast<double>(k);
  // Marginal saving per unit q_i S_i: a sum_k w_k k + (c - a) sum_k w_k k^2 (1-b)^{k-1}.
  auto unit_marginal = [&](double b) {
    const double miss = 1.0 - b;
    double poly = 0.0;
    double pw = 1.0;
    for (std::size_t k = 1; k < w.size(); ++k) {
      poly += w[k] * static_cast<double>(k * k) * pw;
      pw *= miss;
    }
    return a * linear + (c - a) * poly;
  };
  const double top = unit_marginal(0.0);
  const double bottom = unit_marginal(1.0);
  auto marginal = [&](std::size_t i, double b) {
    return lib.popularity(i) * lib.size_bits(i) * unit_marginal(b);
  };
  auto response = [&](std::size_t i, double v) {
    const double target = v / (lib.popularity(i) * lib.size_bits(i));
    if (target <= bottom) return 1.0;
    if (target >= top) return 0.0;
    return quad::bisect([&](double b) { return unit_marginal(b) - target; }, 0.0, 1.0, 1e-15);
  };
  double v_hi = 0.0;
  for (std::size_t i = 0; i < lib.n_files(); ++i) v_hi = std::max(v_hi, marginal(i, 0.0));
  auto fill = detail::water_fill(lib.n_files(), static_cast<double>(lib.cache_size()), 0.0, v_hi, response);
  const double residual = detail::slackness_residual(fill.b, fill.level, marginal);
  const double objective = average_energy(fill.b, lib, cfg, r1, r2);
  return {CachingPolicy(std::move(fill.b), lib.cache_size()), fill.level, objective, fill.iterations,
          residual, false};
}

// --------------------------------------------------------------------- delay

/// D = (zeta_1 D_1 + zeta_2 D_2) / zeta_tot with D_j = 1 / (W_j O_j - zeta_j).
/// Throws UnstableQueue naming the queue whose arrivals reach its service rate.
inline double weighted_delay(std::span<const double> b, const ContentLibrary& lib, int k, double zeta_tot,
                             double w1, double o1, double o2, double w_total) {
  if (!(w1 >= 0.0 && w1 <= w_total)) throw InvalidArgument("weighted_delay: w1 must lie in [0, w_total]");
  const auto rates = arrival_rates(b, lib, k, zeta_tot);
  if (zeta_tot == 0.0) return 0.0;
  double total = 0.0;
  if (rates.zeta_1 > 0.0) total += rates.zeta_1 * per_queue_delay(rates.zeta_1, w1 * o1, 1);
  if (rates.zeta_2 > 0.0) total += rates.zeta_2 * per_queue_delay(rates.zeta_2, (w_total - w1) * o2, 2);
  return total / zeta_tot;
}

struct BandwidthSplit {
  double w1 = 0.0;
  bool degenerate = false;  // no arrivals at either queue; w1 set to w_total / 2
  bool clamped = false;     // pushed inside the open stability interval
};

/// Bandwidth for D2D that minimizes the weighted delay for fixed b:
///   W1* = (zeta_1 + w (O2 W - zeta_2)) / (O1 + w O2),  w = sqrt(O1 zeta_1 / (O2 zeta_2)).
inline BandwidthSplit optimal_bandwidth(std::span<const double> b, const ContentLibrary& lib, int k,
                                        double zeta_tot, double o1, double o2, double w_total) {
  if (!(o1 > 0.0) || !(o2 > 0.0)) throw InvalidArgument("optimal_bandwidth: service coefficients must be positive");
  const auto rates = arrival_rates(b, lib, k, zeta_tot);
  const double x = rates.zeta_1;
  const double y = rates.zeta_2;
  if (x == 0.0 && y == 0.0) return {0.5 * w_total, true, false};
  const double lo = x / o1;
  const double hi = w_total - y / o2;
  if (!(lo < hi)) {
    std::ostringstream msg;
    msg << "no stable bandwidth split: D2D needs " << lo << " Hz, BS needs " << y / o2 << " Hz of " << w_total;
    throw NoStableSplit(msg.str());
  }
  const double margin = 1e-9 * (hi - lo);
  double w1;
  if (x == 0.0) {
    w1 = lo;
  } else if (y == 0.0) {
    w1 = hi;
  } else {
    const double ratio = std::sqrt(o1 * x / (o2 * y));
    w1 = (x + ratio * (o2 * w_total - y)) / (o1 + ratio * o2);
  }
  const double clamped_w1 = std::clamp(w1, lo + margin, hi - margin);
  return {clamped_w1, false, clamped_w1 != w1};
}

struct BcdIterate {
  double w1 = 0.0;
  std::vector<double> b;
  double delay = 0.0;
};

struct BcdTrace {
  std::vector<BcdIterate> iterations;
  bool converged = false;
  std::size_t restarts_used = 0;

  const BcdIterate& final() const { return iterations.back(); }
  double delay() const { return iterations.back().delay; }
};

struct BcdOptions {
  std::size_t restarts = 16;
  double tol = 1e-8;
  std::size_t max_iterations = 200;
  std::uint64_t seed = 1;
  std::vector<double> initial_policy;  // empty: start from the feasibility pre-pass
  int barrier_rounds = 8;
  double barrier_growth = 10.0;
  double stability_margin = 1.0 - 1e-6;
};

namespace detail {

// Caching subproblem for a fixed bandwidth split:
//   min D(b) = X/(mu1 - z X) + Y/(mu2 - z Y)
//   X = sum q((1-b) - (1-b)^k),  Y = sum q (1-b)^k,
// over 0 < b < 1, sum b = M, z X < mu1, z Y < mu2.
class CachingSubproblem {
 public:
  CachingSubproblem(std::span<const double> q, int k, double zeta_tot, double mu1, double mu2, double margin)
      : q_(q), k_(k), zeta_(zeta_tot), mu1_(mu1), mu2_(mu2), margin_(margin) {}

  struct Shares {
    double x = 0.0;
    double y = 0.0;
  };

  Shares shares(std::span<const double> b) const {
    Shares s;
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double miss = 1.0 - b[i];
      const double all = std::pow(miss, k_);
      s.x += q_[i] * (miss - all);
      s.y += q_[i] * all;
    }
    return s;
  }

  bool strictly_feasible(std::span<const double> b) const {
    for (double v : b)
      if (!(v > 0.0 && v < 1.0)) return false;
    const auto s = shares(b);
    return zeta_ * s.x < margin_ * mu1_ && zeta_ * s.y < margin_ * mu2_;
  }

  double delay(std::span<const double> b) const {
    const auto s = shares(b);
    const double g1 = mu1_ - zeta_ * s.x;
    const double g2 = mu2_ - zeta_ * s.y;
    if (!(g1 > 0.0) || !(g2 > 0.0)) return std::numeric_limits<double>::infinity();
    return s.x / g1 + s.y / g2;
  }

  // t D(b) - sum log b - sum log(1-b) - log(m mu1 - z X) - log(m mu2 - z Y)
  double barrier(std::span<const double> b, double t) const {
    const auto s = shares(b);
    const double g1 = mu1_ - zeta_ * s.x;
    const double g2 = mu2_ - zeta_ * s.y;
    const double s1 = margin_ * mu1_ - zeta_ * s.x;
    const double s2 = margin_ * mu2_ - zeta_ * s.y;
    if (!(s1 > 0.0) || !(s2 > 0.0)) return std::numeric_limits<double>::infinity();
    double value = t * (s.x / g1 + s.y / g2) - std::log(s1) - std::log(s2);
    for (double v : b) {
      if (!(v > 0.0 && v < 1.0)) return std::numeric_limits<double>::infinity();
      value -= std::log(v) + std::log1p(-v);
    }
    return value;
  }

  // Barrier Hessian is diag(a) + U C U^T with U = [dX/db, dY/db] and C a
  // non-negative 2x2 diagonal; the diagonal keeps only its positive part.
  struct Curvature {
    std::vector<double> grad, a, ux, uy;
    double c1 = 0.0, c2 = 0.0;
  };

  void derivatives(std::span<const double> b, double t, Curvature& out) const {
    const auto s = shares(b);
    const double g1 = mu1_ - zeta_ * s.x;
    const double g2 = mu2_ - zeta_ * s.y;
    const double s1 = margin_ * mu1_ - zeta_ * s.x;
    const double s2 = margin_ * mu2_ - zeta_ * s.y;
    const double dx = mu1_ / (g1 * g1);
    const double dy = mu2_ / (g2 * g2);
    out.c1 = t * 2.0 * zeta_ * mu1_ / (g1 * g1 * g1) + zeta_ * zeta_ / (s1 * s1);
    out.c2 = t * 2.0 * zeta_ * mu2_ / (g2 * g2 * g2) + zeta_ * zeta_ / (s2 * s2);
    const double kd = static_cast<double>(k_);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double miss = 1.0 - b[i];
      const double pk1 = std::pow(miss, k_ - 1);
      const double pk2 = k_ >= 2 ? std::pow(miss, k_ - 2) : 0.0;
      const double x1 = q_[i] * (kd * pk1 - 1.0);
      const double y1 = -kd * q_[i] * pk1;
      const double x2 = -kd * (kd - 1.0) * q_[i] * pk2;
      const double y2 = -x2;
      out.ux[i] = x1;
      out.uy[i] = y1;
      out.grad[i] = t * (dx * x1 + dy * y1) + zeta_ * (x1 / s1 + y1 / s2) - 1.0 / b[i] + 1.0 / miss;
      out.a[i] = std::max(t * (dx * x2 + dy * y2) + zeta_ * (x2 / s1 + y2 / s2), 0.0) + 1.0 / (b[i] * b[i]) +
                 1.0 / (miss * miss);
    }
  }

  // out = H^{-1} v by the Woodbury identity.
  static void apply_inverse(const Curvature& h, std::span<const double> v, std::vector<double>& out) {
    const std::size_t n = v.size();
    double gxx = 0.0, gxy = 0.0, gyy = 0.0, px = 0.0, py = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = v[i] / h.a[i];
      px += h.ux[i] * out[i];
      py += h.uy[i] * out[i];
      gxx += h.ux[i] * h.ux[i] / h.a[i];
      gxy += h.ux[i] * h.uy[i] / h.a[i];
      gyy += h.uy[i] * h.uy[i] / h.a[i];
    }
    // (I + C G) r = C p
    const double m11 = 1.0 + h.c1 * gxx, m12 = h.c1 * gxy;
    const double m21 = h.c2 * gxy, m22 = 1.0 + h.c2 * gyy;
    const double rhs1 = h.c1 * px, rhs2 = h.c2 * py;
    const double det = m11 * m22 - m12 * m21;
    const double r1 = (rhs1 * m22 - m12 * rhs2) / det;
    const double r2 = (m11 * rhs2 - m21 * rhs1) / det;
    for (std::size_t i = 0; i < n; ++i) out[i] -= (h.ux[i] * r1 + h.uy[i] * r2) / h.a[i];
  }

  // Barrier path from a strictly feasible start; returns the last iterate.
  std::vector<double> solve(std::vector<double> b, const BcdOptions& opt) const {
    const std::size_t n = b.size();
    Curvature h{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    const std::vector<double> ones(n, 1.0);
    std::vector<double> hg(n), h1(n), dir(n), trial(n);
    const double d0 = delay(b);
    double t = (2.0 * n + 2.0) / (1e-2 * std::max(d0, 1e-12));
    for (int round = 0; round < opt.barrier_rounds; ++round, t *= opt.barrier_growth) {
      double phi = barrier(b, t);
      for (int it = 0; it < 200; ++it) {
        derivatives(b, t, h);
        apply_inverse(h, h.grad, hg);
        apply_inverse(h, ones, h1);
        const double nu = std::accumulate(hg.begin(), hg.end(), 0.0) / std::accumulate(h1.begin(), h1.end(), 0.0);
        double slope = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          dir[i] = -(hg[i] - nu * h1[i]);
          slope += h.grad[i] * dir[i];
        }
        if (!(slope < -1e-10 * std::max(1.0, std::abs(phi)) - 1e-12)) break;  // squared Newton decrement
        double step = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (dir[i] < 0.0) step = std::min(step, 0.99 * b[i] / -dir[i]);
          if (dir[i] > 0.0) step = std::min(step, 0.99 * (1.0 - b[i]) / dir[i]);
        }
        bool moved = false;
        for (; step > 1e-16; step *= 0.5) {
          for (std::size_t i = 0; i < n; ++i) trial[i] = b[i] + step * dir[i];
          const double next = barrier(trial, t);
          if (next <= phi + 1e-4 * step * slope) {
            b.swap(trial);
            moved = phi - next > 1e-15 * std::abs(phi);
            phi = next;
            break;
          }
        }
        if (!moved) break;
      }
    }
    return b;
  }

 private:
  std::span<const double> q_;
  int k_;
  double zeta_, mu1_, mu2_, margin_;
};

inline bool has_stable_split(std::span<const double> b, const ContentLibrary& lib, int k, double zeta_tot,
                             double o1, double o2, double w_total) {
  const auto r = arrival_rates(b, lib, k, zeta_tot);
  return r.zeta_1 / o1 + r.zeta_2 / o2 < w_total;
}

// Pull a policy off the faces of the box while keeping sum b = M.
inline std::vector<double> interior(std::span<const double> b, double m, double eps) {
  const double uniform = m / static_cast<double>(b.size());
  std::vector<double> out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) out[i] = (1.0 - eps) * b[i] + eps * uniform;
  return out;
}

// interior() only when some b_i sits on a face of the box.
inline std::vector<double> off_faces(std::span<const double> b, double m, double eps) {
  for (double x : b)
    if (!(x > 0.0 && x < 1.0)) return interior(b, m, eps);
  return {b.begin(), b.end()};
}

// Uniform point of the simplex scaled to sum M, with any excess over 1 redistributed.
inline std::vector<double> random_policy(std::mt19937_64& rng, std::size_t n, double m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n);
  for (auto& x : w) x = -std::log1p(-u(rng));  // exponential draws: uniform on the simplex
  std::vector<bool> capped(n, false);
  std::vector<double> b(n, 0.0);
  for (std::size_t round = 0; round <= n; ++round) {
    double free_mass = m;
    double free_weight = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (capped[i]) {
        free_mass -= 1.0;
      } else {
        free_weight += w[i];
      }
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      b[i] = capped[i] ? 1.0 : free_mass * w[i] / free_weight;
      if (!capped[i] && b[i] > 1.0) {
        capped[i] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return b;
}

}  // namespace detail

/// Joint caching/bandwidth minimization of the weighted delay by block
/// coordinate descent. Each pass sets W1 by the closed form, then runs a
/// barrier descent on b from the current point; a new b is kept only if it
/// lowers the delay, so every run's delay trace is non-increasing. The run
/// with the lowest final delay among `restarts` starts is returned.
inline BcdTrace optimize_delay_bcd(const ContentLibrary& lib, int k, double zeta_tot, double o1, double o2,
                                   double w_total, const BcdOptions& opt = {}) {
  if (k < 1) throw InvalidArgument("optimize_delay_bcd: k must be at least 1");
  if (opt.restarts == 0) throw InvalidArgument("optimize_delay_bcd: restarts must be at least 1");
  const std::size_t n = lib.n_files();
  const double m = static_cast<double>(lib.cache_size());
  constexpr double kInteriorEps = 1e-9;

  // Feasibility pre-pass.
  std::vector<std::vector<double>> anchors;
  for (auto kind : {BaselineKind::Cpf, BaselineKind::ZipfProportional}) {
    auto p = baseline_policy(kind, lib);
    anchors.emplace_back(p.values().begin(), p.values().end());
  }
  anchors.emplace_back(n, m / static_cast<double>(n));
  std::vector<double> anchor;
  double anchor_delay = std::numeric_limits<double>::infinity();
  for (const auto& cand : anchors) {
    auto b = detail::interior(cand, m, kInteriorEps);
    if (!detail::has_stable_split(b, lib, k, zeta_tot, o1, o2, w_total)) continue;
    const auto split = optimal_bandwidth(b, lib, k, zeta_tot, o1, o2, w_total);
    const double d = weighted_delay(b, lib, k, zeta_tot, split.w1, o1, o2, w_total);
    if (d < anchor_delay) {
      anchor_delay = d;
      anchor = std::move(b);
    }
  }
  if (anchor.empty() && opt.initial_policy.empty()) {
    throw InfeasibleLoad("no tested caching policy admits a stable bandwidth split at this load");
  }

  std::mt19937_64 rng(opt.seed);
  auto delay_at = [&](std::span<const double> b, double w1) {
    try {
      return weighted_delay(b, lib, k, zeta_tot, w1, o1, o2, w_total);
    } catch (const UnstableQueue&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  auto run = [&](std::vector<double> b) {
    BcdTrace trace;
    double w1 = optimal_bandwidth(b, lib, k, zeta_tot, o1, o2, w_total).w1;
    double current = delay_at(b, w1);
    trace.iterations.push_back({w1, b, current});
    for (std::size_t it = 0; it < opt.max_iterations; ++it) {
      const double mu1 = o1 * w1;
      const double mu2 = o2 * (w_total - w1);
      detail::CachingSubproblem sub(lib.popularity(), k, zeta_tot, mu1, mu2, opt.stability_margin);
      auto start = detail::off_faces(b, m, kInteriorEps);
      if (sub.strictly_feasible(start)) {
        auto candidate = sub.solve(std::move(start), opt);
        const double cand_delay = delay_at(candidate, w1);
        if (cand_delay < current) {
          b = std::move(candidate);
          current = cand_delay;
        }
      }
      const double new_w1 = optimal_bandwidth(b, lib, k, zeta_tot, o1, o2, w_total).w1;
      const double new_delay = delay_at(b, new_w1);
      if (new_delay <= current) {
        w1 = new_w1;
        current = new_delay;
      }
      const double previous = trace.iterations.back().delay;
      trace.iterations.push_back({w1, b, current});
      if (std::abs(previous - current) <= opt.tol * current) {
        trace.converged = true;
        break;
      }
    }
    return trace;
  };

  std::vector<double> first;
  if (!opt.initial_policy.empty()) {
    if (opt.initial_policy.size() != n) throw InvalidArgument("optimize_delay_bcd: initial policy has wrong length");
    CachingPolicy check(opt.initial_policy, lib.cache_size());
    first = detail::off_faces(check.values(), m, kInteriorEps);
    if (!detail::has_stable_split(first, lib, k, zeta_tot, o1, o2, w_total))
      throw InfeasibleLoad("initial policy admits no stable bandwidth split");
  } else {
    first = anchor;
  }

  BcdTrace best = run(first);
  std::size_t used = 1;
  for (std::size_t r = 1; r < opt.restarts; ++r) {
    auto b = detail::interior(detail::random_policy(rng, n, m), m, 1e-3);
    // Blend toward the anchor until the start admits a stable split.
    for (int tries = 0; tries < 60 && !detail::has_stable_split(b, lib, k, zeta_tot, o1, o2, w_total); ++tries) {
      for (std::size_t i = 0; i < n; ++i) b[i] = 0.5 * (b[i] + anchor[i]);
    }
    if (!detail::has_stable_split(b, lib, k, zeta_tot, o1, o2, w_total)) continue;
    auto trace = run(std::move(b));
    ++used;
    if (trace.delay() < best.delay()) best = std::move(trace);
  }
  best.restarts_used = used;
  return best;
}

/// Service coefficients from the network model: O1 uses single-link D2D
/// coverage, O2 nearest-BS coverage, both divided by the mean file size.
struct ServiceCoefficients {
  double o1 = 0.0;
  double o2 = 0.0;
};

inline ServiceCoefficients service_coefficients(const NetworkConfig& cfg, const ContentLibrary& lib) {
  const double s_bar = lib.mean_size_mbit();
  return {service_coefficient(cfg.theta, d2d_coverage_single_link(cfg), s_bar),
          service_coefficient(cfg.theta, bs_coverage(cfg.theta, cfg.alpha), s_bar)};
}

inline BcdTrace optimize_delay_bcd(const NetworkConfig& cfg, const ContentLibrary& lib, int k, double zeta_tot,
                                   const BcdOptions& opt = {}) {
  const auto o = service_coefficients(cfg, lib);
  return optimize_delay_bcd(lib, k, zeta_tot, o.o1, o.o2, cfg.w_total, opt);
}

}  // namespace d2dcache

#endif
