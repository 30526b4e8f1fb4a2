// Acceptance suite: one line per criterion, exit status 1 if any fails.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "d2dcache/d2dcache.hpp"
#include "oracles.hpp"
#include "runner.hpp"
#include "scenario.hpp"

using namespace d2dcache;
namespace fs = std::filesystem;

namespace {

unsigned g_jobs = 1;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "first failure: " << what;
      pass = false;
    }
  }
};

NetworkConfig table1() {
  NetworkConfig c;
  c.access_p = optimal_access_probability(0.1, c.theta);
  return c;
}

mc::Options mc_options(std::uint64_t seed) {
  mc::Options o;
  o.trials = 100000;
  o.seed = seed;
  o.jobs = g_jobs;
  return o;
}

std::vector<double> to_vec(const CachingPolicy& p) { return {p.values().begin(), p.values().end()}; }

std::vector<double> random_feasible(std::mt19937_64& rng, std::size_t n, double m) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(n);
  for (auto& x : y) x = g(rng);
  return oracle::project_capped_simplex(y, m);
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// ------------------------------------------------------------------------ 1

void analytic_vs_mc_rate(Outcome& out) {
  double worst = 0.0;
  std::uint64_t stream = 100;
  for (double sigma : {10.0, 20.0, 30.0}) {
    for (double theta_db : {0.0, 3.0}) {
      auto cfg = table1();
      cfg.sigma = sigma;
      cfg.theta = std::pow(10.0, theta_db / 10.0);
      cfg.access_p = optimal_access_probability(0.1, cfg.theta);
      const double a = prob_rate_exceeds(cfg, 0.1, cfg.w_total / 2).value;
      const double m = mc::mc_prob_rate_exceeds(cfg, 0.1, cfg.w_total / 2, mc_options(++stream)).mean;
      worst = std::max(worst, std::abs(a - m));
      out.check(std::abs(a - m) < 0.02,
                "sigma=" + fmt(sigma) + " theta_db=" + fmt(theta_db) + " analytic=" + fmt(a) + " mc=" + fmt(m));
    }
  }
  out.detail << (out.pass ? "" : "; ") << "max |analytic - mc| = " << fmt(worst);
}

// ------------------------------------------------------------------------ 2

void single_link_closed_form(Outcome& out) {
  double worst = 0.0;
  std::uint64_t stream = 200;
  for (double sigma : {10.0, 20.0, 30.0}) {
    for (double density : {10.0, 20.0}) {
      auto cfg = table1();
      cfg.sigma = sigma;
      cfg.lambda_p = density * 1e-6;
      const double a = d2d_coverage_single_link(cfg).value;
      const double m = mc::mc_coverage_single_link(cfg, mc_options(++stream)).mean;
      worst = std::max(worst, std::abs(a - m));
      out.check(std::abs(a - m) < 0.02, "sigma=" + fmt(sigma) + " lambda_p=" + fmt(density) + " analytic=" +
                                            fmt(a) + " mc=" + fmt(m));
    }
  }
  const double point = d2d_coverage_single_link(table1()).value;
  out.check(std::abs(point - 0.962) <= 0.01, "derived point " + fmt(point));
  out.detail << (out.pass ? "" : "; ") << "max gap " << fmt(worst) << ", default point " << fmt(point);
}

// ------------------------------------------------------------------------ 3

void bs_coverage_closed_form(Outcome& out) {
  const double v = bs_coverage(1.0, 4.0).value;
  const double series = 1.0 / oracle::hypergeometric_series(1.0, 4.0);
  out.check(std::abs(v - 1.0 / (1.0 + std::atan(1.0))) < 1e-10, "closed form");
  out.check(std::abs(v - series) < 1e-10, "series " + fmt(series));
  out.detail << "value " << fmt(v) << ", |closed - series| = " << std::abs(v - series);
}

// ------------------------------------------------------------------------ 4

// Exhaustive step-0.05 search on N=5, M=2, then an exhaustive step-0.005
// search of the +-0.05 box around the coarse winner. Returns the minimum.
template <class F>
double grid_optimum(F&& f) {
  double low = std::numeric_limits<double>::infinity();
  std::vector<double> arg;
  oracle::enumerate_grid(5, 2.0, 0.05, [&](const std::vector<double>& b) {
    const double v = f(b);
    if (v < low) low = v, arg = b;
  });
  const auto coarse = arg;
  oracle::enumerate_box(coarse, 2.0, 0.05, 0.005, [&](const std::vector<double>& b) { low = std::min(low, f(b)); });
  return low;
}

void kkt_vs_grid(Outcome& out) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_off = 0.0, worst_energy = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double beta = 2.0 * u(rng);
    const auto lib = ContentLibrary::zipf(5, beta, 2, 1.0 + 9.0 * u(rng));
    auto cfg = table1();
    cfg.n_bar = 1.0 + 9.0 * u(rng);
    const double prob = u(rng);

    const auto off = optimize_offloading(cfg, lib, prob);
    auto off_value = [&](const std::vector<double>& b) { return objective_offloading(b, lib, cfg.n_bar, prob); };
    const double best = -grid_optimum([&](const std::vector<double>& b) { return -off_value(b); });
    worst_off = std::max(worst_off, std::abs(best - off.objective));
    out.check(off.objective >= best - 1e-9, "offloading instance " + std::to_string(t) + " worse than grid");
    out.check(std::abs(off.objective - best) <= 1e-3, "offloading instance " + std::to_string(t) + " kkt " +
                                                           fmt(off.objective, 12) + " grid " + fmt(best, 12));

    const int k = 2 + t % 7;
    const double r1 = 1e6 * (1.0 + 9.0 * u(rng));
    const double r2 = 1e6 * (1.0 + 9.0 * u(rng));
    const auto en = optimize_energy(cfg, lib, k, r1, r2);
    const double low = grid_optimum([&](const std::vector<double>& b) { return energy_conditional(b, lib, cfg, k, r1, r2); });
    worst_energy = std::max(worst_energy, std::abs(en.objective - low) / low);
    out.check(en.objective <= low * (1 + 1e-9), "energy instance " + std::to_string(t) + " worse than grid");
    out.check(std::abs(en.objective - low) / low <= 1e-3,
              "energy instance " + std::to_string(t) + " kkt " + fmt(en.objective, 12) + " grid " + fmt(low, 12));
  }
  out.detail << (out.pass ? "" : "; ") << "20 instances; max |kkt - grid| offloading " << fmt(worst_off)
             << ", energy (relative) " << fmt(worst_energy);
}

// ------------------------------------------------------------------------ 5

void scheme_dominance(Outcome& out) {
  const auto cfg = table1();
  std::ostringstream table;
  double improvement_at_1 = 0.0;
  for (double beta : {0.0, 0.5, 1.0, 1.5, 2.0}) {
    const auto lib = ContentLibrary::zipf(500, beta, 10);
    const auto zipf = to_vec(baseline_policy(BaselineKind::ZipfProportional, lib));
    const auto cpf = to_vec(baseline_policy(BaselineKind::Cpf, lib));

    const double w1 = cfg.w_total / 2;
    const double prob = prob_rate_exceeds(cfg, 0.1, w1).value;
    const double off_pc = optimize_offloading(cfg, lib, prob).objective;
    const double off_z = objective_offloading(zipf, lib, cfg.n_bar, prob);
    const double off_c = objective_offloading(cpf, lib, cfg.n_bar, prob);
    out.check(off_pc >= off_z - 1e-12 && off_pc >= off_c - 1e-12, "offloading PC at beta=" + fmt(beta));
    out.check(off_z >= off_c - 0.01, "offloading Zipf vs CPF at beta=" + fmt(beta));

    const double r1 = average_rate(w1, cfg.theta, CoverageResult(prob, CoverageMethod::Analytic));
    const double r2 = average_rate(cfg.w_total - w1, cfg.theta, bs_coverage(cfg.theta, cfg.alpha));
    const double e_pc = optimize_average_energy(cfg, lib, r1, r2).objective;
    const double e_z = average_energy(zipf, lib, cfg, r1, r2);
    const double e_c = average_energy(cpf, lib, cfg, r1, r2);
    out.check(e_pc <= e_z * (1 + 1e-12) && e_pc <= e_c * (1 + 1e-12), "energy at beta=" + fmt(beta));

    const auto o = service_coefficients(cfg, lib);
    const double d_pc = optimize_delay_bcd(lib, 5, 2.0, o.o1, o.o2, cfg.w_total).delay();
    const double d_z = delay_model(zipf, lib, 5, 2.0, w1, o.o1, o.o2, cfg.w_total).d_weighted;
    out.check(d_pc <= d_z, "delay at beta=" + fmt(beta));
    if (beta == 1.0) {
      improvement_at_1 = std::isinf(d_z) ? 1.0 : (d_z - d_pc) / d_z;
      out.check(improvement_at_1 > 0.25, "delay improvement at beta=1 is " + fmt(improvement_at_1));
    }
    table << " | beta=" << fmt(beta) << " off " << fmt(off_pc) << "/" << fmt(off_z) << "/" << fmt(off_c) << " energy "
          << fmt(e_pc) << "/" << fmt(e_z) << "/" << fmt(e_c) << " delay " << fmt(d_pc) << "/"
          << (std::isinf(d_z) ? std::string("unstable") : fmt(d_z));
  }
  out.detail << (out.pass ? "" : "; ") << "delay gain at beta=1 " << fmt(100 * improvement_at_1) << "%"
             << table.str();
}

// ------------------------------------------------------------------------ 6

void bandwidth_closed_form(Outcome& out) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto cfg = table1();
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto lib = ContentLibrary::zipf(100, 2.0 * u(rng), 4);
    const auto o = service_coefficients(cfg, lib);
    const int k = 2 + static_cast<int>(u(rng) * 10);
    const auto b = random_feasible(rng, 100, 4.0);
    const auto shares = request_shares(b, lib, k);
    const double capacity = cfg.w_total / (shares.d2d / o.o1 + shares.bs / o.o2);
    const double zeta = (0.05 + 0.9 * u(rng)) * capacity;
    const auto r = arrival_rates(b, lib, k, zeta);
    const double lo = r.zeta_1 / o.o1, hi = cfg.w_total - r.zeta_2 / o.o2;
    const double eps = 1e-12 * cfg.w_total;
    const double ref = oracle::golden_section_min(
        [&](double w1) {
          return r.zeta_1 / (o.o1 * w1 - r.zeta_1) + r.zeta_2 / (o.o2 * (cfg.w_total - w1) - r.zeta_2);
        },
        lo + eps, hi - eps, 1e-10 * cfg.w_total);
    const double got = optimal_bandwidth(b, lib, k, zeta, o.o1, o.o2, cfg.w_total).w1;
    worst = std::max(worst, std::abs(got - ref) / cfg.w_total);
    out.check(std::abs(got - ref) <= 1e-6 * cfg.w_total, "instance " + std::to_string(t));
  }
  out.detail << (out.pass ? "" : "; ") << "50 instances, max |W1* - argmin| / W = " << worst;
}

// ------------------------------------------------------------------------ 7

void bcd_monotone(Outcome& out) {
  const auto cfg = table1();
  const auto lib = ContentLibrary::zipf(100, 0.5, 4);
  const auto o = service_coefficients(cfg, lib);
  const auto anchor = to_vec(baseline_policy(BaselineKind::Cpf, lib));
  std::mt19937_64 rng(7);
  std::size_t longest = 0;
  for (int run = 0; run < 20; ++run) {
    auto b = random_feasible(rng, 100, 4.0);
    while (!detail::has_stable_split(b, lib, 8, 2.0, o.o1, o.o2, cfg.w_total)) {
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.5 * (b[i] + anchor[i]);
    }
    BcdOptions opt;
    opt.restarts = 1;
    opt.tol = 1e-8;
    opt.max_iterations = 200;
    opt.initial_policy = b;
    const auto t = optimize_delay_bcd(lib, 8, 2.0, o.o1, o.o2, cfg.w_total, opt);
    for (std::size_t i = 1; i < t.iterations.size(); ++i) {
      out.check(t.iterations[i].delay <= t.iterations[i - 1].delay + 1e-12,
                "run " + std::to_string(run) + " step " + std::to_string(i));
    }
    out.check(t.converged, "run " + std::to_string(run) + " did not converge");
    longest = std::max(longest, t.iterations.size() - 1);
  }
  out.detail << (out.pass ? "" : "; ") << "20 runs, longest " << longest << " iterations";
}

// ------------------------------------------------------------------------ 8

void monotonicity(Outcome& out) {
  std::ostringstream notes;
  // Access probability stays at the default operating point across each sweep.
  auto rate_at = [](auto mutate) {
    auto cfg = table1();
    mutate(cfg);
    return prob_rate_exceeds(cfg, 0.1, cfg.w_total / 2).value;
  };
  auto series = [&](const std::string& name, const std::vector<double>& ys, bool increasing, double slack) {
    for (std::size_t i = 1; i < ys.size(); ++i) {
      const bool ok = increasing ? ys[i] >= ys[i - 1] - slack : ys[i] <= ys[i - 1] + slack;
      out.check(ok, name + " at index " + std::to_string(i) + ": " + fmt(ys[i - 1]) + " -> " + fmt(ys[i]));
    }
    notes << " | " << name << ":";
    for (double y : ys) notes << " " << fmt(y);
  };

  std::vector<double> ys;
  for (double s : {10.0, 20.0, 30.0, 40.0, 50.0}) ys.push_back(rate_at([&](NetworkConfig& c) { c.sigma = s; }));
  series("P(R1>R0) vs sigma", ys, false, 1e-9);
  ys.clear();
  for (double db : {0.0, 1.0, 2.0, 3.0, 4.0}) {
    ys.push_back(rate_at([&](NetworkConfig& c) { c.theta = std::pow(10.0, db / 10.0); }));
  }
  series("P(R1>R0) vs theta", ys, false, 1e-9);
  ys.clear();
  for (double d : {10.0, 20.0, 30.0, 40.0, 50.0}) ys.push_back(rate_at([&](NetworkConfig& c) { c.lambda_p = d * 1e-6; }));
  series("P(R1>R0) vs lambda_p", ys, false, 1e-9);

  ys.clear();
  const auto cfg = table1();
  for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0}) {
    const auto lib = ContentLibrary::zipf(100, beta, 4);
    const auto t = optimize_delay_bcd(cfg, lib, 8, 2.0);
    ys.push_back(t.final().w1 / cfg.w_total);
  }
  series("W1*/W vs beta", ys, true, 1e-6);

  auto delay_at = [&](auto mutate) {
    auto c = table1();
    mutate(c);
    return optimize_delay_bcd(c, ContentLibrary::zipf(100, 0.5, 4), 8, 2.0).delay();
  };
  ys.clear();
  for (double s : {10.0, 20.0, 30.0, 40.0}) ys.push_back(delay_at([&](NetworkConfig& c) { c.sigma = s; }));
  series("delay vs sigma", ys, true, 1e-9 * ys.front());
  ys.clear();
  for (double d : {10.0, 20.0, 30.0, 40.0}) ys.push_back(delay_at([&](NetworkConfig& c) { c.lambda_p = d * 1e-6; }));
  series("delay vs lambda_p", ys, true, 1e-9 * ys.front());
  out.detail << notes.str();
}

// ------------------------------------------------------------------------ 9

void convexity(Outcome& out) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto cfg = table1();
  const auto lib = ContentLibrary::zipf(50, 1.0, 5);
  const double prob = prob_rate_exceeds(cfg, 0.1, cfg.w_total / 2).value;
  const double r1 = average_rate(cfg.w_total / 2, cfg.theta, CoverageResult(prob, CoverageMethod::Analytic));
  const double r2 = average_rate(cfg.w_total / 2, cfg.theta, bs_coverage(cfg.theta, cfg.alpha));
  const auto o = service_coefficients(cfg, lib);
  int failures[3] = {0, 0, 0};
  for (int t = 0; t < 1000; ++t) {
    const auto a = random_feasible(rng, 50, 5.0);
    const auto b = random_feasible(rng, 50, 5.0);
    const double lam = u(rng);
    std::vector<double> mix(50);
    for (std::size_t i = 0; i < 50; ++i) mix[i] = lam * a[i] + (1 - lam) * b[i];

    const double po_mix = objective_offloading(mix, lib, cfg.n_bar, prob);
    const double po_avg =
        lam * objective_offloading(a, lib, cfg.n_bar, prob) + (1 - lam) * objective_offloading(b, lib, cfg.n_bar, prob);
    failures[0] += po_mix < po_avg - 1e-12;

    const int k = 2 + t % 9;
    const double e_mix = energy_conditional(mix, lib, cfg, k, r1, r2);
    const double e_avg =
        lam * energy_conditional(a, lib, cfg, k, r1, r2) + (1 - lam) * energy_conditional(b, lib, cfg, k, r1, r2);
    failures[1] += e_mix > e_avg * (1 + 1e-12);

    const auto r = arrival_rates(a, lib, k, 1.0);
    const double lo = r.zeta_1 / o.o1, hi = cfg.w_total - r.zeta_2 / o.o2;
    if (!(lo < hi)) continue;
    const double x = lo + (hi - lo) * (0.001 + 0.998 * u(rng));
    const double y = lo + (hi - lo) * (0.001 + 0.998 * u(rng));
    auto d = [&](double w1) { return weighted_delay(a, lib, k, 1.0, w1, o.o1, o.o2, cfg.w_total); };
    const double d_mix = d(lam * x + (1 - lam) * y);
    const double d_avg = lam * d(x) + (1 - lam) * d(y);
    failures[2] += d_mix > d_avg * (1 + 1e-12);
  }
  out.check(failures[0] == 0, "offloading concavity");
  out.check(failures[1] == 0, "energy convexity");
  out.check(failures[2] == 0, "delay convexity in W1");
  out.detail << (out.pass ? "" : "; ") << "violations offloading/energy/delay: " << failures[0] << "/" << failures[1]
             << "/" << failures[2] << " of 1000 each";
}

// ----------------------------------------------------------------------- 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void deterministic_validate(Outcome& out) {
  auto s = cli::default_table1();
  s.name = "validate";
  s.tasks = {cli::Task::Validate};
  const auto base = fs::temp_directory_path() / "d2dcache_acceptance_validate";
  fs::remove_all(base);
  s.output_dir = (base / "a").string();
  const auto ra = cli::run_scenario(s, {g_jobs});
  s.output_dir = (base / "b").string();
  const auto rb = cli::run_scenario(s, {g_jobs});
  const auto a = slurp(base / "a" / "validate.csv");
  const auto b = slurp(base / "b" / "validate.csv");
  out.check(!a.empty() && a == b, "validate.csv differs between runs");
  out.check(ra.exit_code == cli::kExitOk && rb.exit_code == cli::kExitOk,
            "validate exit code " + std::to_string(ra.exit_code));
  out.detail << (out.pass ? "" : "; ") << "validate.csv " << a.size() << " bytes, identical=" << (a == b)
             << ", exit code " << ra.exit_code;
  fs::remove_all(base);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--jobs", g_jobs, "Monte Carlo worker threads")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"analytic vs Monte Carlo P(R1>R0), 6 points", analytic_vs_mc_rate},
      {"single-link coverage closed form vs Monte Carlo", single_link_closed_form},
      {"BS coverage closed form vs series", bs_coverage_closed_form},
      {"KKT vs exhaustive grid (offloading, energy)", kkt_vs_grid},
      {"scheme dominance over beta", scheme_dominance},
      {"bandwidth closed form vs golden section", bandwidth_closed_form},
      {"BCD trace monotone and terminating", bcd_monotone},
      {"monotonicity suite", monotonicity},
      {"concavity/convexity property tests", convexity},
      {"validate determinism", deterministic_validate},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !out.pass;
    std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << ", "
              << fmt(secs) << " s): " << out.detail.str() << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
