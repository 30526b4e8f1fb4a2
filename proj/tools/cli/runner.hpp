#ifndef D2DCACHE_CLI_RUNNER_HPP
#define D2DCACHE_CLI_RUNNER_HPP

#include <optional>
#include <string>
#include <vector>

#include "d2dcache/core_model.hpp"
#include "scenario.hpp"

namespace d2dcache::cli {

enum class Status { Ok, Infeasible, Error };
const char* to_string(Status s);

// One grid point with the sweep variable applied.
struct PointSetup {
  std::optional<double> x;
  NetworkConfig cfg;
  ContentLibrary lib;
};

PointSetup setup_point(const Scenario& s, std::optional<double> x);

// Numeric fields left at -1 were not computed (status is not ok).
struct OffloadPoint {
  double access_p = -1.0;
  double prob_r1 = -1.0;
  double pc = -1.0, zipf = -1.0, cpf = -1.0;
  double multiplier = -1.0;
  Status status = Status::Ok;
  std::string reason;
};

struct EnergyPoint {
  double access_p = -1.0;
  double r1 = -1.0, r2 = -1.0;  // bits/s with W1 = W2 = W/2
  double pc = -1.0, zipf = -1.0, cpf = -1.0;  // average energy, joules
  Status status = Status::Ok;
  std::string reason;
};

struct DelayPoint {
  double p_cd = -1.0;
  double w1_fraction = -1.0;  // W1* / W of the BCD solution
  double pc = -1.0;
  double zipf_equal = -1.0;  // Zipf policy with W1 = W2 = W/2; -1 when unstable
  double cpf_equal = -1.0;
  bool zipf_equal_stable = false;
  bool cpf_equal_stable = false;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t restarts = 0;
  Status status = Status::Ok;
  std::string reason;
};

struct ValidationRow {
  std::string quantity;
  double analytic = 0.0;
  double mc_mean = 0.0;
  double mc_hw95 = 0.0;
  double tolerance = 0.0;
  bool relative = false;
  bool pass = false;
};

struct ValidationPoint {
  std::vector<ValidationRow> rows;
  double conditional_exact_gap = 0.0;  // |exact binomial MC - Poisson MC|
  Status status = Status::Ok;
  std::string reason;
};

OffloadPoint evaluate_offload(const Scenario& s, const PointSetup& p);
EnergyPoint evaluate_energy(const Scenario& s, const PointSetup& p);
DelayPoint evaluate_delay(const Scenario& s, const PointSetup& p);
ValidationPoint evaluate_validation(const Scenario& s, const PointSetup& p, unsigned jobs);

struct RunOptions {
  unsigned jobs = 1;
};

struct RunReport {
  int exit_code = 0;
  std::vector<std::string> files;
  bool numeric_failure = false;
  bool validation_failed = false;
};

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitValidation = 4 };

/// Runs every task over the sweep grid and writes <task>.csv plus
/// summary.json into the scenario's output directory.
RunReport run_scenario(const Scenario& s, const RunOptions& opt = {});

/// Fixed-precision rendering used for every CSV cell; never emits nan/inf.
std::string format_number(double v);

}  // namespace d2dcache::cli

#endif
