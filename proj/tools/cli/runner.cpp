#include "runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "d2dcache/montecarlo.hpp"
#include "d2dcache/optimize.hpp"
#include "d2dcache/queueing.hpp"
#include "d2dcache/stochgeo.hpp"
#include "d2dcache/version.hpp"
#include "json.hpp"

namespace d2dcache::cli {

const char* to_string(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::Infeasible: return "infeasible";
    case Status::Error: return "error";
  }
  return "?";
}

std::string format_number(double v) {
  if (!std::isfinite(v)) return "-1";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

PointSetup setup_point(const Scenario& s, std::optional<double> x) {
  NetworkConfig cfg = s.network;
  double beta = s.beta;
  bool auto_p = s.access_p_auto;
  if (x && s.sweep) {
    switch (s.sweep->variable) {
      case SweepVariable::Beta: beta = *x; break;
      case SweepVariable::Sigma: cfg.sigma = *x; break;
      case SweepVariable::LambdaP: cfg.lambda_p = *x * 1e-6; break;
      case SweepVariable::NBar: cfg.n_bar = *x; break;
      case SweepVariable::Theta: cfg.theta = *x; break;
      case SweepVariable::AccessP:
        cfg.access_p = *x;
        auto_p = false;
        break;
    }
  }
  if (auto_p) cfg.access_p = optimal_access_probability(s.r0_over_w1, cfg.theta, s.access_epsilon);
  cfg.validate();
  return {x, cfg, ContentLibrary::zipf(s.n_files, beta, s.cache_size, s.mean_size_mbit)};
}

namespace {

// Runs `body`, turning library exceptions into a row status.
template <class Point, class Body>
Point guarded(Body&& body) {
  Point out;
  try {
    body(out);
  } catch (const InfeasibleAccessProbability& e) {
    out.status = Status::Infeasible;
    out.reason = e.what();
  } catch (const ConvexityViolated& e) {
    out.status = Status::Infeasible;
    out.reason = e.what();
  } catch (const InfeasibleLoad& e) {
    out.status = Status::Infeasible;
    out.reason = e.what();
  } catch (const NoStableSplit& e) {
    out.status = Status::Infeasible;
    out.reason = e.what();
  } catch (const std::exception& e) {
    out.status = Status::Error;
    out.reason = e.what();
  }
  return out;
}

}  // namespace

OffloadPoint evaluate_offload(const Scenario& s, const PointSetup& p) {
  return guarded<OffloadPoint>([&](OffloadPoint& out) {
    out.access_p = p.cfg.access_p;
    out.prob_r1 = prob_rate_exceeds(p.cfg, s.r0_over_w1, 0.5 * p.cfg.w_total).value;
    const auto sol = optimize_offloading(p.cfg, p.lib, out.prob_r1);
    out.pc = sol.objective;
    out.multiplier = sol.multiplier;
    const auto zipf = baseline_policy(BaselineKind::ZipfProportional, p.lib);
    const auto cpf = baseline_policy(BaselineKind::Cpf, p.lib);
    out.zipf = objective_offloading(zipf.values(), p.lib, p.cfg.n_bar, out.prob_r1);
    out.cpf = objective_offloading(cpf.values(), p.lib, p.cfg.n_bar, out.prob_r1);
  });
}

EnergyPoint evaluate_energy(const Scenario& s, const PointSetup& p) {
  return guarded<EnergyPoint>([&](EnergyPoint& out) {
    out.access_p = p.cfg.access_p;
    const double half = 0.5 * p.cfg.w_total;
    out.r1 = average_rate(half, p.cfg.theta, prob_rate_exceeds(p.cfg, s.r0_over_w1, half));
    out.r2 = average_rate(half, p.cfg.theta, bs_coverage(p.cfg.theta, p.cfg.alpha));
    const auto sol = optimize_average_energy(p.cfg, p.lib, out.r1, out.r2);
    out.pc = sol.objective;
    const auto zipf = baseline_policy(BaselineKind::ZipfProportional, p.lib);
    const auto cpf = baseline_policy(BaselineKind::Cpf, p.lib);
    out.zipf = average_energy(zipf.values(), p.lib, p.cfg, out.r1, out.r2);
    out.cpf = average_energy(cpf.values(), p.lib, p.cfg, out.r1, out.r2);
  });
}

DelayPoint evaluate_delay(const Scenario& s, const PointSetup& p) {
  return guarded<DelayPoint>([&](DelayPoint& out) {
    const auto o = service_coefficients(p.cfg, p.lib);
    out.p_cd = d2d_coverage_single_link(p.cfg).value;
    const double w = p.cfg.w_total;
    auto equal_split = [&](BaselineKind kind, double& delay, bool& stable) {
      const auto pol = baseline_policy(kind, p.lib);
      const auto m = delay_model(pol.values(), p.lib, s.delay_k, s.zeta_tot, 0.5 * w, o.o1, o.o2, w);
      stable = m.stable_1 && m.stable_2;
      delay = stable ? m.d_weighted : -1.0;
    };
    equal_split(BaselineKind::ZipfProportional, out.zipf_equal, out.zipf_equal_stable);
    equal_split(BaselineKind::Cpf, out.cpf_equal, out.cpf_equal_stable);
    BcdOptions opt;
    opt.restarts = s.restarts;
    opt.seed = s.seed;
    const auto trace = optimize_delay_bcd(p.lib, s.delay_k, s.zeta_tot, o.o1, o.o2, w, opt);
    out.pc = trace.delay();
    out.w1_fraction = trace.final().w1 / w;
    out.iterations = trace.iterations.size() - 1;
    out.converged = trace.converged;
    out.restarts = trace.restarts_used;
  });
}

ValidationPoint evaluate_validation(const Scenario& s, const PointSetup& p, unsigned jobs) {
  return guarded<ValidationPoint>([&](ValidationPoint& out) {
    const auto& cfg = p.cfg;
    std::uint64_t stream = 0;
    auto mc_opts = [&]() {
      mc::Options o;
      o.trials = s.mc_trials;
      o.seed = mc::splitmix64(s.seed + ++stream);
      o.jobs = jobs;
      return o;
    };
    auto add = [&](std::string name, double analytic, const mc::McEstimate& est, double tol, bool relative) {
      const double gap = std::abs(analytic - est.mean);
      const bool pass = relative ? gap <= tol * std::abs(analytic) : gap <= tol;
      out.rows.push_back({std::move(name), analytic, est.mean, est.half_width_95, tol, relative, pass});
    };

    const double half = 0.5 * cfg.w_total;
    add("prob_rate_exceeds", prob_rate_exceeds(cfg, s.r0_over_w1, half).value,
        mc::mc_prob_rate_exceeds(cfg, s.r0_over_w1, half, mc_opts()), 0.02, false);

    const int k = std::max(1, static_cast<int>(std::lround(cfg.n_bar)));
    const auto cond = mc::mc_coverage_conditional(cfg, k, mc_opts());
    add("coverage_conditional_k" + std::to_string(k), d2d_coverage_conditional(cfg, k).value, cond.poisson_approx,
        0.02, false);
    out.conditional_exact_gap = std::abs(cond.exact.mean - cond.poisson_approx.mean);

    add("coverage_single_link", d2d_coverage_single_link(cfg).value, mc::mc_coverage_single_link(cfg, mc_opts()),
        0.02, false);
    add("bs_coverage", bs_coverage(cfg.theta, cfg.alpha).value, mc::mc_bs_coverage(cfg.theta, cfg.alpha, mc_opts()),
        0.02, false);

    const auto inter_arg = LaplaceArg::for_link(cfg.theta, 2.0 * cfg.sigma, cfg.alpha);
    add("laplace_inter_r2sigma", laplace_inter(inter_arg, cfg), mc::mc_laplace_inter(inter_arg, cfg, mc_opts()), 0.01,
        true);
    const auto intra_arg = LaplaceArg::for_link(cfg.theta, cfg.sigma, cfg.alpha);
    const double intensity = cfg.access_p * cfg.n_bar;
    add("laplace_intra_rsigma", laplace_intra(intra_arg, intensity, cfg.sigma, cfg.alpha),
        mc::mc_laplace_intra(intra_arg, intensity, cfg.sigma, cfg.alpha, mc::IntraGeometry::IndependentDistances,
                             mc_opts()),
        0.01, true);
  });
}

namespace {

struct PointResult {
  PointSetup setup;
  std::optional<OffloadPoint> offload;
  std::optional<EnergyPoint> energy;
  std::optional<DelayPoint> delay;
  std::optional<ValidationPoint> validation;
  double wall_seconds = 0.0;
};

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw ConfigError("output_dir", "cannot write " + path.string());
    out_ << "# schema=1\n";
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << escape(cells[i]);
    out_ << "\n";
  }

 private:
  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c == '\n' ? ' ' : c;
    }
    return q + "\"";
  }
  std::ofstream out_;
};

std::string flag(bool b) { return b ? "true" : "false"; }

nlohmann::json config_echo(const Scenario& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["mc_trials"] = s.mc_trials;
  j["output_dir"] = s.output_dir;
  for (auto t : s.tasks) j["tasks"].push_back(to_string(t));
  const auto& n = s.network;
  j["network"] = {{"lambda_p_per_km2", n.lambda_p * 1e6}, {"n_bar", n.n_bar}, {"sigma", n.sigma},
                  {"alpha", n.alpha},                     {"theta", n.theta}, {"p_d", n.p_d},
                  {"p_b", n.p_b},                         {"w_total", n.w_total}};
  j["network"]["access_p"] = s.access_p_auto ? nlohmann::json("auto") : nlohmann::json(n.access_p);
  j["network"]["r0_over_w1"] = s.r0_over_w1;
  j["network"]["access_epsilon"] = s.access_epsilon;
  j["library"] = {{"n_files", s.n_files}, {"beta", s.beta}, {"cache_size", s.cache_size},
                  {"mean_size_mbit", s.mean_size_mbit}};
  j["delay"] = {{"zeta_tot", s.zeta_tot}, {"k", s.delay_k}, {"restarts", s.restarts}};
  if (s.sweep) j["sweep"] = {{"variable", to_string(s.sweep->variable)}, {"grid", s.sweep->grid}};
  return j;
}

}  // namespace

RunReport run_scenario(const Scenario& s, const RunOptions& opt) {
  s.validate();
  std::vector<std::optional<double>> xs;
  if (s.sweep) {
    for (double x : s.sweep->grid) xs.emplace_back(x);
  } else {
    xs.emplace_back(std::nullopt);
  }

  // Resolve every point up front so bad grid values fail as config errors.
  std::vector<PointResult> results;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    try {
      results.push_back({setup_point(s, xs[i]), {}, {}, {}, {}, 0.0});
    } catch (const InfeasibleAccessProbability& e) {
      throw ConfigError("sweep.grid[" + std::to_string(i) + "]", e.what());
    } catch (const InvariantViolation& e) {
      throw ConfigError("sweep.grid[" + std::to_string(i) + "]", e.what());
    }
  }

  namespace fs = std::filesystem;
  const fs::path dir(s.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output_dir", "cannot create " + s.output_dir);

  const unsigned jobs = std::max(1u, opt.jobs);
  const bool parallel_points = jobs > 1 && results.size() > 1;
  const unsigned mc_jobs = parallel_points ? 1u : jobs;

  auto compute = [&](PointResult& r) {
    const auto t0 = std::chrono::steady_clock::now();
    if (s.has_task(Task::Offload)) r.offload = evaluate_offload(s, r.setup);
    if (s.has_task(Task::Energy)) r.energy = evaluate_energy(s, r.setup);
    if (s.has_task(Task::Delay)) r.delay = evaluate_delay(s, r.setup);
    if (s.has_task(Task::Validate)) r.validation = evaluate_validation(s, r.setup, mc_jobs);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  if (parallel_points) {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(jobs, results.size()); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < results.size(); i = next++) compute(results[i]);
      });
    }
  } else {
    for (auto& r : results) compute(r);
  }

  RunReport report;
  const std::string var = s.sweep ? to_string(s.sweep->variable) : "";
  auto with_x = [&](const PointResult& r, std::vector<std::string> cells) {
    if (s.sweep) cells.insert(cells.begin(), format_number(*r.setup.x));
    return cells;
  };
  auto header = [&](std::vector<std::string> cols) {
    if (s.sweep) cols.insert(cols.begin(), var);
    return cols;
  };
  auto note = [&](Status st) {
    if (st == Status::Error) report.numeric_failure = true;
  };

  if (s.has_task(Task::Offload)) {
    const auto path = dir / "offload.csv";
    CsvWriter csv(path, header({"access_p", "prob_r1", "offload_pc", "offload_zipf", "offload_cpf", "multiplier",
                                "status", "reason"}));
    for (const auto& r : results) {
      const auto& o = *r.offload;
      note(o.status);
      csv.row(with_x(r, {format_number(o.access_p), format_number(o.prob_r1), format_number(o.pc),
                         format_number(o.zipf), format_number(o.cpf), format_number(o.multiplier),
                         to_string(o.status), o.reason}));
    }
    report.files.push_back(path.string());
  }
  if (s.has_task(Task::Energy)) {
    const auto path = dir / "energy.csv";
    CsvWriter csv(path, header({"access_p", "r1_bps", "r2_bps", "energy_pc_j", "energy_zipf_j", "energy_cpf_j",
                                "status", "reason"}));
    for (const auto& r : results) {
      const auto& e = *r.energy;
      note(e.status);
      csv.row(with_x(r, {format_number(e.access_p), format_number(e.r1), format_number(e.r2), format_number(e.pc),
                         format_number(e.zipf), format_number(e.cpf), to_string(e.status), e.reason}));
    }
    report.files.push_back(path.string());
  }
  if (s.has_task(Task::Delay)) {
    const auto path = dir / "delay.csv";
    CsvWriter csv(path, header({"k", "zeta_tot", "p_cd", "w1_fraction", "delay_pc_s", "delay_zipf_equal_s",
                                "zipf_equal_stable", "delay_cpf_equal_s", "cpf_equal_stable", "bcd_iterations",
                                "converged", "restarts", "status", "reason"}));
    for (const auto& r : results) {
      const auto& d = *r.delay;
      note(d.status);
      csv.row(with_x(r, {std::to_string(s.delay_k), format_number(s.zeta_tot), format_number(d.p_cd),
                         format_number(d.w1_fraction), format_number(d.pc), format_number(d.zipf_equal),
                         flag(d.zipf_equal_stable), format_number(d.cpf_equal), flag(d.cpf_equal_stable),
                         std::to_string(d.iterations), flag(d.converged), std::to_string(d.restarts),
                         to_string(d.status), d.reason}));
    }
    report.files.push_back(path.string());
  }
  if (s.has_task(Task::Validate)) {
    const auto path = dir / "validate.csv";
    CsvWriter csv(path, header({"quantity", "analytic", "mc_mean", "mc_hw95", "tolerance", "tolerance_kind", "pass",
                                "status", "reason"}));
    for (const auto& r : results) {
      const auto& v = *r.validation;
      note(v.status);
      if (v.status != Status::Ok) {
        report.validation_failed = true;
        csv.row(with_x(r, {"", "-1", "-1", "-1", "-1", "", flag(false), to_string(v.status), v.reason}));
        continue;
      }
      for (const auto& row : v.rows) {
        if (!row.pass) report.validation_failed = true;
        csv.row(with_x(r, {row.quantity, format_number(row.analytic), format_number(row.mc_mean),
                           format_number(row.mc_hw95), format_number(row.tolerance),
                           row.relative ? "relative" : "absolute", flag(row.pass), "ok", ""}));
      }
    }
    report.files.push_back(path.string());
  }

  report.exit_code = report.numeric_failure ? kExitNumeric : report.validation_failed ? kExitValidation : kExitOk;

  nlohmann::json summary;
  summary["version"] = kVersion;
  summary["config"] = config_echo(s);
  summary["files"] = report.files;
  summary["exit_code"] = report.exit_code;
  for (const auto& r : results) {
    nlohmann::json pt;
    if (r.setup.x) pt[var] = *r.setup.x;
    pt["access_p"] = r.setup.cfg.access_p;
    pt["wall_seconds"] = r.wall_seconds;
    if (r.offload) pt["offload"] = to_string(r.offload->status);
    if (r.energy) pt["energy"] = to_string(r.energy->status);
    if (r.delay) pt["delay"] = to_string(r.delay->status);
    if (r.validation) {
      pt["validate"] = to_string(r.validation->status);
      pt["conditional_exact_vs_poisson_gap"] = r.validation->conditional_exact_gap;
    }
    summary["points"].push_back(pt);
  }
  std::ofstream js(dir / "summary.json");
  if (!js) throw ConfigError("output_dir", "cannot write summary.json");
  js << summary.dump(2) << "\n";
  return report;
}

}  // namespace d2dcache::cli
