#ifndef D2DCACHE_CORE_MODEL_HPP
#define D2DCACHE_CORE_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "d2dcache/errors.hpp"

namespace d2dcache {

/// Physical layer and geometry of the clustered network. Lengths in metres,
/// powers in watts, bandwidth in Hz, theta linear.
struct NetworkConfig {
  double lambda_p = 2e-5;  // parent (cluster-centre) density per m^2
  double n_bar = 5.0;      // mean devices per cluster
  double sigma = 10.0;     // displacement standard deviation
  double alpha = 4.0;      // path-loss exponent
  double theta = 1.0;      // SIR threshold
  double p_d = 0.19952623149688797;  // 23 dBm
  double p_b = 19.952623149688797;   // 43 dBm
  double w_total = 20e6;
  double access_p = 0.1;  // slotted-ALOHA access probability

  void validate() const {
    auto fail = [](const std::string& what) { throw InvariantViolation("NetworkConfig: " + what); };
    if (!(alpha > 2.0)) fail("alpha must exceed 2");
    if (!(access_p >= 0.0 && access_p <= 1.0)) fail("access_p must lie in [0, 1]");
    if (!(theta > 0.0)) fail("theta must be positive");
    if (!(sigma > 0.0)) fail("sigma must be positive");
    if (!(lambda_p > 0.0)) fail("lambda_p must be positive");
    if (!(n_bar > 0.0)) fail("n_bar must be positive");
    if (!(p_d > 0.0) || !(p_b > 0.0)) fail("transmit powers must be positive");
    if (!(w_total > 0.0)) fail("w_total must be positive");
  }
};

namespace detail {

// Neumaier-compensated sum.
inline double stable_sum(std::span<const double> xs) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

}  // namespace detail

/// q_i = i^{-beta} / sum_k k^{-beta}, i = 1..n_files (returned 0-based).
inline std::vector<double> zipf_popularity(std::size_t n_files, double beta) {
  if (n_files == 0) throw InvalidArgument("zipf_popularity: n_files must be at least 1");
  if (!(beta >= 0.0)) throw InvalidArgument("zipf_popularity: beta must be non-negative");
  std::vector<double> q(n_files);
  for (std::size_t i = 0; i < n_files; ++i) q[i] = std::pow(static_cast<double>(i + 1), -beta);
  // Sum smallest-first on top of the compensation.
  std::vector<double> rev(q.rbegin(), q.rend());
  const double norm = detail::stable_sum(rev);
  for (auto& x : q) x /= norm;
  return q;
}

/// File catalogue with request popularity, per-file sizes (megabits) and the
/// per-device cache capacity M.
class ContentLibrary {
 public:
  ContentLibrary(std::vector<double> popularity, std::vector<double> sizes_mbit,
                 std::size_t cache_size, double beta = 0.0)
      : popularity_(std::move(popularity)),
        sizes_mbit_(std::move(sizes_mbit)),
        cache_size_(cache_size),
        beta_(beta) {
    validate();
  }

  /// Zipf library with every file of size `mean_size_mbit`.
  static ContentLibrary zipf(std::size_t n_files, double beta, std::size_t cache_size,
                             double mean_size_mbit = 5.0) {
    if (n_files == 0) throw InvalidArgument("ContentLibrary: n_files must be at least 1");
    return ContentLibrary(zipf_popularity(n_files, beta),
                          std::vector<double>(n_files, mean_size_mbit), cache_size, beta);
  }

  std::size_t n_files() const { return popularity_.size(); }
  std::size_t cache_size() const { return cache_size_; }
  double beta() const { return beta_; }
  std::span<const double> popularity() const { return popularity_; }
  double popularity(std::size_t i) const { return popularity_[i]; }
  std::span<const double> sizes_mbit() const { return sizes_mbit_; }
  double size_bits(std::size_t i) const { return sizes_mbit_[i] * 1e6; }
  double mean_size_mbit() const {
    return detail::stable_sum(sizes_mbit_) / static_cast<double>(sizes_mbit_.size());
  }
  double mean_size_bits() const { return mean_size_mbit() * 1e6; }

  /// Copy with every size multiplied by `factor`.
  ContentLibrary with_scaled_sizes(double factor) const {
    auto sizes = sizes_mbit_;
    for (auto& s : sizes) s *= factor;
    return ContentLibrary(popularity_, std::move(sizes), cache_size_, beta_);
  }

  ContentLibrary with_popularity(std::vector<double> popularity) const {
    return ContentLibrary(std::move(popularity), sizes_mbit_, cache_size_, beta_);
  }

  ContentLibrary with_sizes(std::vector<double> sizes_mbit) const {
    return ContentLibrary(popularity_, std::move(sizes_mbit), cache_size_, beta_);
  }

 private:
  void validate() const {
    auto fail = [](const std::string& what) { throw InvariantViolation("ContentLibrary: " + what); };
    if (popularity_.empty()) fail("empty catalogue");
    if (sizes_mbit_.size() != popularity_.size()) fail("sizes and popularity differ in length");
    if (cache_size_ == 0 || cache_size_ >= popularity_.size())
      fail("cache size must satisfy 0 < M < n_files");
    for (double q : popularity_)
      if (!(q >= 0.0)) fail("negative popularity");
    if (std::abs(detail::stable_sum(popularity_) - 1.0) > 1e-12) fail("popularity must sum to 1");
    for (double s : sizes_mbit_)
      if (!(s > 0.0) || !std::isfinite(s)) fail("file sizes must be positive");
  }

  std::vector<double> popularity_;
  std::vector<double> sizes_mbit_;
  std::size_t cache_size_;
  double beta_;
};

/// Per-file caching probabilities b with 0 <= b_i <= 1 and sum b_i = M.
class CachingPolicy {
 public:
  static constexpr double kSumTolerance = 1e-9;

  CachingPolicy(std::vector<double> b, std::size_t cache_size) : b_(std::move(b)) {
    for (std::size_t i = 0; i < b_.size(); ++i) {
      if (!(b_[i] >= 0.0 && b_[i] <= 1.0)) {
        std::ostringstream msg;
        msg << "CachingPolicy: b[" << i << "] = " << b_[i] << " outside [0, 1]";
        throw InvariantViolation(msg.str());
      }
    }
    const double total = detail::stable_sum(b_);
    if (std::abs(total - static_cast<double>(cache_size)) > kSumTolerance) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "CachingPolicy: sum of b is " << total << ", expected " << cache_size;
      throw InvariantViolation(msg.str());
    }
  }

  std::span<const double> values() const { return b_; }
  double operator[](std::size_t i) const { return b_[i]; }
  std::size_t size() const { return b_.size(); }

 private:
  std::vector<double> b_;
};

/// The M distinct files one device ends up storing (0-based, ascending).
struct CacheRealization {
  std::vector<std::size_t> cached;
};

/// Fills the M unit blocks left to right with b_1..b_N and cuts every block
/// at offset `uniform_draw`; the file under each cut is cached. File i lands
/// in the cache with probability exactly b_i.
inline CacheRealization sample_cache_realization(const CachingPolicy& policy, double uniform_draw) {
  if (!(uniform_draw >= 0.0 && uniform_draw < 1.0))
    throw InvalidArgument("sample_cache_realization: draw must lie in [0, 1)");
  const auto b = policy.values();
  std::vector<double> upper(b.size());
  std::partial_sum(b.begin(), b.end(), upper.begin());
  const auto blocks = static_cast<std::size_t>(std::llround(upper.empty() ? 0.0 : upper.back()));

  CacheRealization out;
  out.cached.reserve(blocks);
  for (std::size_t block = 0; block < blocks; ++block) {
    const double cut = static_cast<double>(block) + uniform_draw;
    auto it = std::upper_bound(upper.begin(), upper.end(), cut);
    std::size_t idx = it == upper.end() ? b.size() - 1 : static_cast<std::size_t>(it - upper.begin());
    // Rounding can leave the cut on a zero-width slot; step back to real mass.
    while (idx > 0 && b[idx] == 0.0) --idx;
    if (!out.cached.empty() && out.cached.back() == idx) {
      throw InvariantViolation("sample_cache_realization: duplicate file selected");
    }
    out.cached.push_back(idx);
  }
  return out;
}

enum class BaselineKind { ZipfProportional, Cpf };

/// Reference schemes: CPF caches the M most popular files; Zipf-proportional
/// uses b_i = min(1, c q_i) with c chosen so that sum b_i = M.
inline CachingPolicy baseline_policy(BaselineKind kind, const ContentLibrary& lib) {
  const std::size_t n = lib.n_files();
  const std::size_t m = lib.cache_size();
  std::vector<double> b(n, 0.0);
  if (kind == BaselineKind::Cpf) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
      return lib.popularity(a) > lib.popularity(c);
    });
    for (std::size_t j = 0; j < m; ++j) b[order[j]] = 1.0;
    return CachingPolicy(std::move(b), m);
  }

  std::vector<bool> clipped(n, false);
  for (std::size_t round = 0; round <= n; ++round) {
    double free_mass = static_cast<double>(m);
    double free_pop = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (clipped[i]) {
        free_mass -= 1.0;
      } else {
        free_pop += lib.popularity(i);
      }
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (clipped[i]) {
        b[i] = 1.0;
        continue;
      }
      b[i] = free_pop > 0.0 ? free_mass * lib.popularity(i) / free_pop : 0.0;
      if (b[i] > 1.0) {
        clipped[i] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  // Absorb rounding so the sum constraint holds to the last bit we can get.
  double excess = detail::stable_sum(b) - static_cast<double>(m);
  for (std::size_t i = 0; i < n && std::abs(excess) > 0.0; ++i) {
    if (clipped[i]) continue;
    const double adj = std::clamp(b[i] - excess, 0.0, 1.0);
    excess -= b[i] - adj;
    b[i] = adj;
  }
  return CachingPolicy(std::move(b), m);
}

}  // namespace d2dcache

#endif
