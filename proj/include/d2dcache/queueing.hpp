#ifndef D2DCACHE_QUEUEING_HPP
#define D2DCACHE_QUEUEING_HPP

// Request-level traffic model of one cluster: Poisson requests split between
// the self cache, the D2D queue (Q1) and the BS queue (Q2); both queues are
// M/M/1 in the dominant system.

#include <cmath>
#include <limits>
#include <span>
#include <sstream>

#include "d2dcache/core_model.hpp"
#include "d2dcache/errors.hpp"
#include "d2dcache/stochgeo.hpp"

namespace d2dcache {

struct ArrivalRates {
  double zeta_1 = 0.0;  // served over D2D
  double zeta_2 = 0.0;  // served by the BS
  double zeta_3 = 0.0;  // served from the own cache, zero delay
};

/// Sums X = sum q_i((1-b_i) - (1-b_i)^k) and Y = sum q_i (1-b_i)^k; the
/// queue arrival rates are zeta_tot * X and zeta_tot * Y.
struct RequestShares {
  double d2d = 0.0;
  double bs = 0.0;
};

inline RequestShares request_shares(std::span<const double> b, const ContentLibrary& lib, int k) {
  if (k < 1) throw InvalidArgument("arrival_rates: k must be at least 1");
  RequestShares out;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double miss = 1.0 - b[i];
    const double all_miss = std::pow(miss, k);
    out.d2d += lib.popularity(i) * (miss - all_miss);
    out.bs += lib.popularity(i) * all_miss;
  }
  return out;
}

inline ArrivalRates arrival_rates(std::span<const double> b, const ContentLibrary& lib, int k, double zeta_tot) {
  if (!(zeta_tot >= 0.0)) throw InvalidArgument("arrival_rates: zeta_tot must be non-negative");
  const auto shares = request_shares(b, lib, k);
  ArrivalRates out;
  out.zeta_1 = zeta_tot * shares.d2d;
  out.zeta_2 = zeta_tot * shares.bs;
  out.zeta_3 = zeta_tot - out.zeta_1 - out.zeta_2;
  if (out.zeta_3 < 0.0) out.zeta_3 = 0.0;  // rounding only; shares sum to <= 1
  return out;
}

inline ArrivalRates arrival_rates(const CachingPolicy& policy, const ContentLibrary& lib, int k, double zeta_tot) {
  return arrival_rates(policy.values(), lib, k, zeta_tot);
}

/// Requests per second per Hz of bandwidth: P_c log2(1+theta) / S_bar.
inline double service_coefficient(double theta, const CoverageResult& coverage, double s_bar_mbit) {
  if (!(s_bar_mbit > 0.0)) throw InvalidArgument("service_rate: mean file size must be positive");
  return coverage.value * std::log2(1.0 + theta) / (s_bar_mbit * 1e6);
}

inline double service_rate(double w, double theta, const CoverageResult& coverage, double s_bar_mbit) {
  if (!(w >= 0.0)) throw InvalidArgument("service_rate: bandwidth must be non-negative");
  return w * service_coefficient(theta, coverage, s_bar_mbit);
}

struct QueueLength {
  double printed_formula = 0.0;  // rho + 2 rho^2 / (2 zeta (1 - rho))
  double mm1 = 0.0;              // rho / (1 - rho)
  bool inconsistent = false;     // the two disagree beyond 1e-9 relative
};

namespace detail {

inline void require_stable(double zeta, double mu, int queue) {
  if (!(zeta >= 0.0) || !(mu >= 0.0)) throw InvalidArgument("queue rates must be non-negative");
  if (zeta == 0.0) return;
  if (!(zeta / mu < 1.0 - 1e-9)) {
    std::ostringstream msg;
    msg << "queue " << queue << " unstable: arrival rate " << zeta << " >= service rate " << mu;
    throw UnstableQueue(queue, msg.str());
  }
}

}  // namespace detail

/// Mean number of requests in an M/M/1 queue. Both the closed form printed
/// with the Pollaczek-Khinchine argument and the textbook rho/(1-rho) are
/// returned; they only coincide at rho = 0 and where zeta = 1.
inline QueueLength mean_queue_length(double zeta, double mu, int queue = 1) {
  detail::require_stable(zeta, mu, queue);
  QueueLength out;
  if (zeta == 0.0) return out;
  const double rho = zeta / mu;
  out.printed_formula = rho + 2.0 * rho * rho / (2.0 * zeta * (1.0 - rho));
  out.mm1 = rho / (1.0 - rho);
  out.inconsistent = std::abs(out.printed_formula - out.mm1) > 1e-9 * std::max(1.0, out.mm1);
  return out;
}

/// Mean sojourn time 1 / (mu - zeta) of an M/M/1 queue.
inline double per_queue_delay(double zeta, double mu, int queue = 1) {
  detail::require_stable(zeta, mu, queue);
  return 1.0 / (mu - zeta);
}

/// Everything the delay analysis tracks for one (policy, bandwidth split).
/// Delays of an unstable queue are +inf; queues with no arrivals have d = 0
/// contribution but report 1/mu when mu > 0.
struct DelayModel {
  double zeta_tot = 0.0;
  double zeta_1 = 0.0, zeta_2 = 0.0, zeta_3 = 0.0;
  double mu_1 = 0.0, mu_2 = 0.0;
  double rho_1 = 0.0, rho_2 = 0.0;
  double w1 = 0.0, w2 = 0.0;
  bool stable_1 = false, stable_2 = false;
  double d1 = 0.0, d2 = 0.0, d_weighted = 0.0;
};

inline DelayModel delay_model(std::span<const double> b, const ContentLibrary& lib, int k, double zeta_tot,
                              double w1, double o1, double o2, double w_total) {
  if (!(w1 >= 0.0 && w1 <= w_total)) throw InvalidArgument("delay_model: w1 must lie in [0, w_total]");
  constexpr double inf = std::numeric_limits<double>::infinity();
  DelayModel m;
  const auto rates = arrival_rates(b, lib, k, zeta_tot);
  m.zeta_tot = zeta_tot;
  m.zeta_1 = rates.zeta_1;
  m.zeta_2 = rates.zeta_2;
  m.zeta_3 = rates.zeta_3;
  m.w1 = w1;
  m.w2 = w_total - w1;
  m.mu_1 = o1 * m.w1;
  m.mu_2 = o2 * m.w2;
  m.rho_1 = m.mu_1 > 0.0 ? m.zeta_1 / m.mu_1 : (m.zeta_1 > 0.0 ? inf : 0.0);
  m.rho_2 = m.mu_2 > 0.0 ? m.zeta_2 / m.mu_2 : (m.zeta_2 > 0.0 ? inf : 0.0);
  m.stable_1 = m.zeta_1 == 0.0 || m.rho_1 < 1.0;
  m.stable_2 = m.zeta_2 == 0.0 || m.rho_2 < 1.0;
  m.d1 = m.stable_1 ? (m.mu_1 > m.zeta_1 ? 1.0 / (m.mu_1 - m.zeta_1) : 0.0) : inf;
  m.d2 = m.stable_2 ? (m.mu_2 > m.zeta_2 ? 1.0 / (m.mu_2 - m.zeta_2) : 0.0) : inf;
  if (!m.stable_1 || !m.stable_2) {
    m.d_weighted = inf;
  } else if (zeta_tot > 0.0) {
    m.d_weighted = ((m.zeta_1 > 0.0 ? m.zeta_1 * m.d1 : 0.0) + (m.zeta_2 > 0.0 ? m.zeta_2 * m.d2 : 0.0)) / zeta_tot;
  }
  return m;
}

}  // namespace d2dcache

#endif
