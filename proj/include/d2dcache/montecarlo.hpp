#ifndef D2DCACHE_MONTECARLO_HPP
#define D2DCACHE_MONTECARLO_HPP

// Monte Carlo estimates of the coverage quantities in stochgeo.hpp, built
// directly from samples of the Thomas cluster process. Used as an oracle for
// the analytic expressions and by the `validate` task.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

#include "d2dcache/core_model.hpp"
#include "d2dcache/errors.hpp"
#include "d2dcache/stochgeo.hpp"

namespace d2dcache::mc {

struct Point {
  double x = 0.0;
  double y = 0.0;
  Point operator+(const Point& o) const { return {x + o.x, y + o.y}; }
  double norm() const { return std::hypot(x, y); }
};

struct McEstimate {
  double mean = 0.0;
  double half_width_95 = 0.0;  // 1.96 * sample std / sqrt(samples)
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

struct Options {
  std::size_t trials = 100'000;
  std::uint64_t seed = 1;
  double region_radius = 0.0;  // 0 picks max(15 sigma, 5 / sqrt(pi lambda_p))
  unsigned jobs = 1;
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Trials are cut into fixed-size chunks, each with its own stream derived
/// from (seed, chunk index). Chunk sums are merged in index order, so the
/// estimate does not depend on `jobs`.
inline McEstimate run_trials(const Options& opt, const std::function<double(Rng&)>& trial) {
  if (opt.trials == 0) throw InvalidArgument("monte carlo: trials must be at least 1");
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (opt.trials + kChunk - 1) / kChunk;
  std::vector<double> sum(chunks, 0.0);
  std::vector<double> sum_sq(chunks, 0.0);

  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t c = first; c < chunks; c += stride) {
      Rng rng(splitmix64(opt.seed ^ splitmix64(c + 1)));
      const std::size_t begin = c * kChunk;
      const std::size_t end = std::min(opt.trials, begin + kChunk);
      double s = 0.0, s2 = 0.0;
      for (std::size_t t = begin; t < end; ++t) {
        const double x = trial(rng);
        s += x;
        s2 += x * x;
      }
      sum[c] = s;
      sum_sq[c] = s2;
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(chunks)));
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
  }

  double s = 0.0, s2 = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    s += sum[c];
    s2 += sum_sq[c];
  }
  const double n = static_cast<double>(opt.trials);
  McEstimate est;
  est.mean = s / n;
  const double var = opt.trials > 1 ? std::max(0.0, (s2 - n * est.mean * est.mean) / (n - 1.0)) : 0.0;
  est.half_width_95 = 1.96 * std::sqrt(var / n);
  est.samples = opt.trials;
  est.seed = opt.seed;
  return est;
}

inline double default_region_radius(const NetworkConfig& cfg) {
  return std::max(15.0 * cfg.sigma, 5.0 / std::sqrt(std::numbers::pi * cfg.lambda_p));
}

inline Point gaussian_offset(Rng& rng, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  const double x = n(rng);
  return {x, n(rng)};
}

inline Point uniform_in_disk(Rng& rng, double radius) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = radius * std::sqrt(u(rng));
  const double a = 2.0 * std::numbers::pi * u(rng);
  return {r * std::cos(a), r * std::sin(a)};
}

inline std::size_t poisson(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::size_t> d(mean);
  return d(rng);
}

inline double exp1(Rng& rng) {
  std::exponential_distribution<double> d(1.0);
  return d(rng);
}

/// Cluster centres (a PPP of density lambda_p in a disk of `region_radius`
/// around the origin) and per-cluster member offsets, Poisson(n_bar) members
/// each, drawn N(0, sigma^2 I).
struct ClusterRealization {
  std::vector<Point> centers;
  std::vector<std::vector<Point>> members;
};

inline ClusterRealization sample_tcp(const NetworkConfig& cfg, double region_radius, std::uint64_t seed) {
  Rng rng(splitmix64(seed));
  ClusterRealization out;
  const double area = std::numbers::pi * region_radius * region_radius;
  const std::size_t clusters = poisson(rng, cfg.lambda_p * area);
  out.centers.reserve(clusters);
  out.members.reserve(clusters);
  for (std::size_t c = 0; c < clusters; ++c) {
    out.centers.push_back(uniform_in_disk(rng, region_radius));
    const std::size_t n = poisson(rng, cfg.n_bar);
    std::vector<Point> offsets;
    offsets.reserve(n);
    for (std::size_t j = 0; j < n; ++j) offsets.push_back(gaussian_offset(rng, cfg.sigma));
    out.members.push_back(std::move(offsets));
  }
  return out;
}

namespace detail {

inline double path_gain(double d, double alpha) { return std::pow(d, -alpha); }

// Faded interference, in units of the D2D power, at the origin from remote
// clusters, each contributing `per_cluster(rng)` active devices.
template <class ActiveCount>
double remote_interference(Rng& rng, const NetworkConfig& cfg, double radius, ActiveCount&& per_cluster) {
  const double area = std::numbers::pi * radius * radius;
  const std::size_t clusters = poisson(rng, cfg.lambda_p * area);
  double interference = 0.0;
  for (std::size_t c = 0; c < clusters; ++c) {
    const Point centre = uniform_in_disk(rng, radius);
    const std::size_t active = per_cluster(rng);
    for (std::size_t j = 0; j < active; ++j) {
      const Point z = centre + gaussian_offset(rng, cfg.sigma);
      interference += exp1(rng) * path_gain(z.norm(), cfg.alpha);
    }
  }
  return interference;
}

// One trial of the representative-cluster link: typical device at the origin,
// cluster centre displaced N(0, sigma^2 I), serving member N(0, sigma^2 I)
// around the centre, `intra` active interferers in the same cluster.
template <class RemoteCount>
double link_success(Rng& rng, const NetworkConfig& cfg, double radius, std::size_t intra,
                    RemoteCount&& remote_count) {
  const Point centre = gaussian_offset(rng, cfg.sigma);
  const double r = (centre + gaussian_offset(rng, cfg.sigma)).norm();
  double interference = 0.0;
  for (std::size_t j = 0; j < intra; ++j) {
    interference += exp1(rng) * path_gain((centre + gaussian_offset(rng, cfg.sigma)).norm(), cfg.alpha);
  }
  interference += remote_interference(rng, cfg, radius, remote_count);
  const double signal = exp1(rng) * path_gain(r, cfg.alpha);
  return signal > cfg.theta * interference ? 1.0 : 0.0;
}

inline double radius_for(const NetworkConfig& cfg, const Options& opt) {
  return opt.region_radius > 0.0 ? opt.region_radius : default_region_radius(cfg);
}

}  // namespace detail

/// Fraction of slotted-ALOHA trials in which SIR > theta on the D2D link.
inline McEstimate mc_prob_rate_exceeds(const NetworkConfig& cfg, double r0_over_w1, double w1, const Options& opt) {
  cfg.validate();
  if (!(cfg.access_p * w1 * std::log2(1.0 + cfg.theta) > r0_over_w1 * w1)) {
    throw InfeasibleAccessProbability("mc_prob_rate_exceeds: access_p cannot carry R0/W1");
  }
  const double radius = detail::radius_for(cfg, opt);
  const double active = cfg.access_p * cfg.n_bar;
  return run_trials(opt, [&](Rng& rng) {
    return detail::link_success(rng, cfg, radius, poisson(rng, active),
                                [&](Rng& g) { return poisson(g, active); });
  });
}

struct ConditionalCoverageEstimate {
  McEstimate exact;        // k devices, the k-1 non-serving ones each active w.p. access_p
  McEstimate poisson_approx;  // Poisson(access_p * k) active intra-cluster interferers
};

/// D2D coverage with k devices in the representative cluster, simulated both
/// exactly and under the Poisson(access_p k) interferer approximation.
inline ConditionalCoverageEstimate mc_coverage_conditional(const NetworkConfig& cfg, int k, const Options& opt) {
  cfg.validate();
  if (k < 1) throw InvalidArgument("mc_coverage_conditional: k must be at least 1");
  const double radius = detail::radius_for(cfg, opt);
  const double remote_mean = cfg.access_p * cfg.n_bar;
  auto remote = [&](Rng& g) { return poisson(g, remote_mean); };
  ConditionalCoverageEstimate out;
  out.exact = run_trials(opt, [&](Rng& rng) {
    std::binomial_distribution<std::size_t> active(static_cast<std::size_t>(k - 1), cfg.access_p);
    return detail::link_success(rng, cfg, radius, active(rng), remote);
  });
  Options approx = opt;
  approx.seed = splitmix64(opt.seed + 0x51ed);
  out.poisson_approx = run_trials(approx, [&](Rng& rng) {
    return detail::link_success(rng, cfg, radius, poisson(rng, cfg.access_p * k), remote);
  });
  out.poisson_approx.seed = opt.seed;
  return out;
}

/// Coverage with exactly one active transmitter in every remote cluster and
/// none besides the server in the representative one.
inline McEstimate mc_coverage_single_link(const NetworkConfig& cfg, const Options& opt) {
  cfg.validate();
  const double radius = detail::radius_for(cfg, opt);
  return run_trials(opt, [&](Rng& rng) {
    return detail::link_success(rng, cfg, radius, 0, [](Rng&) { return std::size_t{1}; });
  });
}

/// E[exp(-s I)] for the remote-cluster interference, fading averaged in
/// closed form per interferer.
inline McEstimate mc_laplace_inter(LaplaceArg arg, const NetworkConfig& cfg, const Options& opt) {
  cfg.validate();
  const double radius = detail::radius_for(cfg, opt);
  const double active = cfg.access_p * cfg.n_bar;
  return run_trials(opt, [&](Rng& rng) {
    const double area = std::numbers::pi * radius * radius;
    const std::size_t clusters = poisson(rng, cfg.lambda_p * area);
    double product = 1.0;
    for (std::size_t c = 0; c < clusters; ++c) {
      const Point centre = uniform_in_disk(rng, radius);
      const std::size_t n = poisson(rng, active);
      for (std::size_t j = 0; j < n; ++j) {
        const double u = (centre + gaussian_offset(rng, cfg.sigma)).norm();
        product /= 1.0 + arg.s * std::pow(u, -cfg.alpha);
      }
    }
    return product;
  });
}

enum class IntraGeometry {
  IndependentDistances,  // each interferer's distance drawn Rayleigh(sqrt(2) sigma) on its own
  SharedCentre,          // all interferers scattered around one displaced cluster centre
};

/// E[exp(-s I)] for Poisson(intensity) intra-cluster interferers.
inline McEstimate mc_laplace_intra(LaplaceArg arg, double intensity, double sigma, double alpha,
                                   IntraGeometry geometry, const Options& opt) {
  return run_trials(opt, [&](Rng& rng) {
    const Point centre = gaussian_offset(rng, sigma);
    const std::size_t n = poisson(rng, intensity);
    double product = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = geometry == IntraGeometry::SharedCentre
                           ? (centre + gaussian_offset(rng, sigma)).norm()
                           : (gaussian_offset(rng, sigma) + gaussian_offset(rng, sigma)).norm();
      product /= 1.0 + arg.s * std::pow(h, -alpha);
    }
    return product;
  });
}

/// Nearest-BS coverage for a unit-density PPP of base stations in a disk of
/// `opt.region_radius` (default 25), Rayleigh fading, no noise.
inline McEstimate mc_bs_coverage(double theta, double alpha, const Options& opt) {
  const double radius = opt.region_radius > 0.0 ? opt.region_radius : 25.0;
  return run_trials(opt, [&](Rng& rng) {
    const std::size_t n = poisson(rng, std::numbers::pi * radius * radius);
    if (n == 0) return 0.0;
    std::vector<double> dist(n);
    for (auto& d : dist) d = uniform_in_disk(rng, radius).norm();
    const auto nearest = std::min_element(dist.begin(), dist.end());
    double interference = 0.0;
    double signal = 0.0;
    for (auto it = dist.begin(); it != dist.end(); ++it) {
      const double p = exp1(rng) * std::pow(*it, -alpha);
      if (it == nearest) {
        signal = p;
      } else {
        interference += p;
      }
    }
    return signal > theta * interference ? 1.0 : 0.0;
  });
}

}  // namespace d2dcache::mc

#endif
