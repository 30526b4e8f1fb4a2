#ifndef D2DCACHE_CLI_SCENARIO_HPP
#define D2DCACHE_CLI_SCENARIO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "d2dcache/core_model.hpp"
#include "d2dcache/errors.hpp"

namespace d2dcache::cli {

class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class SweepVariable { Beta, Sigma, LambdaP, NBar, AccessP, Theta };
enum class Task { Offload, Energy, Delay, Validate };

const char* to_string(SweepVariable v);
const char* to_string(Task t);

struct Sweep {
  SweepVariable variable = SweepVariable::Beta;
  // Natural units of the variable: lambda_p in clusters/km^2, theta linear.
  std::vector<double> grid;
};

struct Scenario {
  std::string name = "scenario";
  NetworkConfig network;
  bool access_p_auto = true;  // place p just above the rate-feasibility threshold
  double r0_over_w1 = 0.1;
  double access_epsilon = 1e-6;

  std::size_t n_files = 500;
  double beta = 1.0;
  std::size_t cache_size = 10;
  double mean_size_mbit = 5.0;

  double zeta_tot = 2.0;
  int delay_k = 5;
  std::size_t restarts = 16;

  std::optional<Sweep> sweep;
  std::vector<Task> tasks;
  std::size_t mc_trials = 100000;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  bool has_task(Task t) const;
  void validate() const;
};

/// p* for the scenario's rate threshold and SIR threshold.
double optimal_access_probability_for(const Scenario& s);

Scenario default_table1();
Scenario parse_scenario(const std::string& yaml_text);
Scenario load_scenario(const std::string& path);
std::string dump_scenario(const Scenario& s);

double dbm_to_watts(double dbm);
double db_to_linear(double db);

}  // namespace d2dcache::cli

#endif
