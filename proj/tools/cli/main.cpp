#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "runner.hpp"
#include "scenario.hpp"

using namespace d2dcache::cli;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> mc_trials;
  unsigned jobs = 1;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "master RNG seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--mc-trials", o.mc_trials, "Monte Carlo trials per quantity");
  cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
}

int execute(Scenario s, const Overrides& o) {
  if (o.seed) s.seed = *o.seed;
  if (o.out) s.output_dir = *o.out;
  if (o.mc_trials) s.mc_trials = *o.mc_trials;
  const auto report = run_scenario(s, {o.jobs});
  for (const auto& f : report.files) std::cout << f << "\n";
  if (report.numeric_failure) std::cerr << "numeric failure in at least one row; see the status column\n";
  if (report.validation_failed) std::cerr << "validation failed; see validate.csv\n";
  return report.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clustered D2D caching: coverage, caching optimizers and validation"};
  app.require_subcommand(1);

  std::string scenario_file;
  Overrides run_opts;
  auto* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("scenario", scenario_file, "YAML scenario")->required();
  add_overrides(run, run_opts);

  Overrides validate_opts;
  auto* validate = app.add_subcommand("validate", "analytic vs Monte Carlo check at the default parameters");
  add_overrides(validate, validate_opts);

  app.add_subcommand("print-default-config", "print the default scenario as YAML");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return execute(load_scenario(scenario_file), run_opts);
    if (*validate) {
      auto s = default_table1();
      s.name = "validate";
      s.tasks = {Task::Validate};
      s.output_dir = "out/validate";
      return execute(s, validate_opts);
    }
    std::cout << dump_scenario(default_table1());
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const d2dcache::NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}
