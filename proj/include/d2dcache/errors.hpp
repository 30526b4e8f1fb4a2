#ifndef D2DCACHE_ERRORS_HPP
#define D2DCACHE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace d2dcache {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

// A value type was handed data that breaks one of its invariants.
struct InvariantViolation : Error {
  using Error::Error;
};

// Quadrature or root finding failed to converge. `what()` carries diagnostics.
struct NumericFailure : Error {
  using Error::Error;
};

// access_p * log2(1 + theta) does not exceed the required spectral rate R0/W1.
struct InfeasibleAccessProbability : Error {
  using Error::Error;
};

// P_b/R_2 <= P_d/R_1: the energy objective is not convex and the KKT rule does
// not apply.
struct ConvexityViolated : Error {
  using Error::Error;
};

struct UnstableQueue : Error {
  UnstableQueue(int queue, const std::string& msg)
      : Error(msg), queue_index(queue) {}
  int queue_index;  // 1 = D2D queue, 2 = BS queue
};

struct NoStableSplit : Error {
  using Error::Error;
};

struct InfeasibleLoad : Error {
  using Error::Error;
};

}  // namespace d2dcache

#endif
