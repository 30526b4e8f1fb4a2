#include "scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "d2dcache/stochgeo.hpp"

namespace d2dcache::cli {

const char* to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::Beta: return "beta";
    case SweepVariable::Sigma: return "sigma";
    case SweepVariable::LambdaP: return "lambda_p";
    case SweepVariable::NBar: return "n_bar";
    case SweepVariable::AccessP: return "p";
    case SweepVariable::Theta: return "theta";
  }
  return "?";
}

const char* to_string(Task t) {
  switch (t) {
    case Task::Offload: return "offload";
    case Task::Energy: return "energy";
    case Task::Delay: return "delay";
    case Task::Validate: return "validate";
  }
  return "?";
}

double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

bool Scenario::has_task(Task t) const { return std::find(tasks.begin(), tasks.end(), t) != tasks.end(); }

void Scenario::validate() const {
  try {
    network.validate();
  } catch (const InvariantViolation& e) {
    throw ConfigError("network", e.what());
  }
  if (!(r0_over_w1 >= 0.0)) throw ConfigError("network.r0_over_w1", "must be non-negative");
  if (!(access_epsilon > 0.0)) throw ConfigError("network.access_epsilon", "must be positive");
  if (n_files < 2) throw ConfigError("library.n_files", "must be at least 2");
  if (cache_size == 0 || cache_size >= n_files) throw ConfigError("library.cache_size", "must satisfy 0 < M < n_files");
  if (!(beta >= 0.0)) throw ConfigError("library.beta", "must be non-negative");
  if (!(mean_size_mbit > 0.0)) throw ConfigError("library.mean_size_mbit", "must be positive");
  if (!(zeta_tot >= 0.0)) throw ConfigError("delay.zeta_tot", "must be non-negative");
  if (delay_k < 1) throw ConfigError("delay.k", "must be at least 1");
  if (restarts < 1) throw ConfigError("delay.restarts", "must be at least 1");
  if (tasks.empty()) throw ConfigError("tasks", "must name at least one task");
  if (mc_trials < 1) throw ConfigError("mc_trials", "must be at least 1");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  if (sweep) {
    const auto& g = sweep->grid;
    if (g.empty()) throw ConfigError("sweep.grid", "must not be empty");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) throw ConfigError("sweep.grid", "values must be finite");
      if (i > 0 && !(g[i] > g[i - 1])) throw ConfigError("sweep.grid", "must be strictly increasing");
    }
  }
}

double optimal_access_probability_for(const Scenario& s) {
  return optimal_access_probability(s.r0_over_w1, s.network.theta, s.access_epsilon);
}

Scenario default_table1() {
  Scenario s;
  s.name = "table1";
  s.network.w_total = 20e6;
  s.network.p_b = dbm_to_watts(43.0);
  s.network.p_d = dbm_to_watts(23.0);
  s.network.sigma = 10.0;
  s.network.alpha = 4.0;
  s.network.n_bar = 5.0;
  s.network.lambda_p = 20.0 * 1e-6;
  s.network.theta = db_to_linear(0.0);
  s.access_p_auto = true;
  s.network.access_p = optimal_access_probability_for(s);
  s.n_files = 500;
  s.beta = 1.0;
  s.cache_size = 10;
  s.mean_size_mbit = 5.0;
  s.zeta_tot = 2.0;
  s.delay_k = 5;
  s.tasks = {Task::Offload, Task::Energy, Task::Delay, Task::Validate};
  return s;
}

namespace {

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

class Reader {
 public:
  Reader(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsMap()) throw ConfigError(path_, "expected a mapping");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_ && node_[key];
  }

  template <class T>
  T get(const std::string& key) {
    seen_.insert(key);
    try {
      return node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(join(path_, key), "has the wrong type");
    }
  }

  template <class T>
  void maybe(const std::string& key, T& out) {
    if (has(key)) out = get<T>(key);
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return node_ ? node_[key] : YAML::Node();
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  // Reject keys nobody asked for, which are almost always typos.
  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError(join(path_, key), "unknown key");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T>
T non_negative_count(Reader& r, const std::string& key) {
  const auto v = r.get<long long>(key);
  if (v < 0) throw ConfigError(r.path(key), "must be non-negative");
  return static_cast<T>(v);
}

double exclusive(Reader& r, const std::string& linear_key, const std::string& db_key, double fallback,
                 double (*convert)(double)) {
  const bool lin = r.has(linear_key);
  const bool db = r.has(db_key);
  if (lin && db) throw ConfigError(r.path(db_key), "give either " + linear_key + " or " + db_key + ", not both");
  if (lin) return r.get<double>(linear_key);
  if (db) return convert(r.get<double>(db_key));
  return fallback;
}

SweepVariable parse_variable(const std::string& name, const std::string& path) {
  for (auto v : {SweepVariable::Beta, SweepVariable::Sigma, SweepVariable::LambdaP, SweepVariable::NBar,
                 SweepVariable::AccessP, SweepVariable::Theta}) {
    if (name == to_string(v)) return v;
  }
  throw ConfigError(path, "unknown sweep variable '" + name + "'");
}

Task parse_task(const std::string& name, const std::string& path) {
  for (auto t : {Task::Offload, Task::Energy, Task::Delay, Task::Validate}) {
    if (name == to_string(t)) return t;
  }
  throw ConfigError(path, "unknown task '" + name + "'");
}

}  // namespace

Scenario parse_scenario(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("malformed YAML: ") + e.what());
  }
  if (!root || root.IsNull()) throw ConfigError("", "empty scenario");
  Scenario s = default_table1();
  s.tasks.clear();
  Reader top(root, "");
  top.maybe("name", s.name);
  top.maybe("seed", s.seed);
  if (top.has("mc_trials")) s.mc_trials = non_negative_count<std::size_t>(top, "mc_trials");
  top.maybe("output_dir", s.output_dir);

  if (top.has("tasks")) {
    auto node = top.child("tasks");
    if (!node.IsSequence()) throw ConfigError("tasks", "expected a list");
    for (std::size_t i = 0; i < node.size(); ++i) {
      const auto path = "tasks[" + std::to_string(i) + "]";
      s.tasks.push_back(parse_task(node[i].as<std::string>(), path));
    }
  }

  Reader net(top.child("network"), "network");
  if (net.has("lambda_p_per_km2")) s.network.lambda_p = net.get<double>("lambda_p_per_km2") * 1e-6;
  net.maybe("n_bar", s.network.n_bar);
  net.maybe("sigma", s.network.sigma);
  net.maybe("alpha", s.network.alpha);
  s.network.theta = exclusive(net, "theta", "theta_db", s.network.theta, db_to_linear);
  s.network.p_d = exclusive(net, "p_d", "p_d_dbm", s.network.p_d, dbm_to_watts);
  s.network.p_b = exclusive(net, "p_b", "p_b_dbm", s.network.p_b, dbm_to_watts);
  net.maybe("w_total", s.network.w_total);
  net.maybe("r0_over_w1", s.r0_over_w1);
  net.maybe("access_epsilon", s.access_epsilon);
  if (net.has("access_p")) {
    auto node = net.child("access_p");
    if (node.IsScalar() && node.as<std::string>() == "auto") {
      s.access_p_auto = true;
    } else {
      s.access_p_auto = false;
      s.network.access_p = net.get<double>("access_p");
    }
  }
  net.finish();

  Reader lib(top.child("library"), "library");
  if (lib.has("n_files")) s.n_files = non_negative_count<std::size_t>(lib, "n_files");
  if (lib.has("cache_size")) s.cache_size = non_negative_count<std::size_t>(lib, "cache_size");
  lib.maybe("beta", s.beta);
  lib.maybe("mean_size_mbit", s.mean_size_mbit);
  lib.finish();

  Reader delay(top.child("delay"), "delay");
  delay.maybe("zeta_tot", s.zeta_tot);
  if (delay.has("k")) s.delay_k = delay.get<int>("k");
  if (delay.has("restarts")) s.restarts = non_negative_count<std::size_t>(delay, "restarts");
  delay.finish();

  if (top.has("sweep")) {
    Reader sw(top.child("sweep"), "sweep");
    if (!sw.has("variable")) throw ConfigError("sweep.variable", "missing");
    Sweep sweep;
    sweep.variable = parse_variable(sw.get<std::string>("variable"), "sweep.variable");
    const bool lin = sw.has("grid");
    const bool db = sw.has("grid_db");
    if (lin == db) throw ConfigError("sweep.grid", "give exactly one of grid or grid_db");
    if (db && sweep.variable != SweepVariable::Theta) throw ConfigError("sweep.grid_db", "only theta takes a dB grid");
    const auto key = lin ? "grid" : "grid_db";
    auto node = sw.child(key);
    if (!node.IsSequence()) throw ConfigError(sw.path(key), "expected a list");
    for (std::size_t i = 0; i < node.size(); ++i) {
      double v = 0.0;
      try {
        v = node[i].as<double>();
      } catch (const YAML::Exception&) {
        throw ConfigError(sw.path(key) + "[" + std::to_string(i) + "]", "not a number");
      }
      sweep.grid.push_back(db ? db_to_linear(v) : v);
    }
    sw.finish();
    s.sweep = std::move(sweep);
  }
  top.finish();

  if (s.access_p_auto) {
    try {
      s.network.access_p = optimal_access_probability_for(s);
    } catch (const InfeasibleAccessProbability& e) {
      throw ConfigError("network.r0_over_w1", e.what());
    }
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string dump_scenario(const Scenario& s) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << s.name;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::Key << "mc_trials" << YAML::Value << s.mc_trials;
  out << YAML::Key << "output_dir" << YAML::Value << s.output_dir;
  out << YAML::Key << "tasks" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto t : s.tasks) out << to_string(t);
  out << YAML::EndSeq;

  out << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lambda_p_per_km2" << YAML::Value << s.network.lambda_p * 1e6;
  out << YAML::Key << "n_bar" << YAML::Value << s.network.n_bar;
  out << YAML::Key << "sigma" << YAML::Value << s.network.sigma;
  out << YAML::Key << "alpha" << YAML::Value << s.network.alpha;
  out << YAML::Key << "theta" << YAML::Value << s.network.theta;
  out << YAML::Key << "p_d" << YAML::Value << s.network.p_d << YAML::Comment("watts");
  out << YAML::Key << "p_b" << YAML::Value << s.network.p_b << YAML::Comment("watts");
  out << YAML::Key << "w_total" << YAML::Value << s.network.w_total;
  out << YAML::Key << "access_p";
  if (s.access_p_auto) {
    out << YAML::Value << "auto";
  } else {
    out << YAML::Value << s.network.access_p;
  }
  out << YAML::Key << "r0_over_w1" << YAML::Value << s.r0_over_w1;
  out << YAML::Key << "access_epsilon" << YAML::Value << s.access_epsilon;
  out << YAML::EndMap;

  out << YAML::Key << "library" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n_files" << YAML::Value << s.n_files;
  out << YAML::Key << "beta" << YAML::Value << s.beta;
  out << YAML::Key << "cache_size" << YAML::Value << s.cache_size;
  out << YAML::Key << "mean_size_mbit" << YAML::Value << s.mean_size_mbit;
  out << YAML::EndMap;

  out << YAML::Key << "delay" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "zeta_tot" << YAML::Value << s.zeta_tot;
  out << YAML::Key << "k" << YAML::Value << s.delay_k;
  out << YAML::Key << "restarts" << YAML::Value << s.restarts;
  out << YAML::EndMap;

  if (s.sweep) {
    out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "variable" << YAML::Value << to_string(s.sweep->variable);
    out << YAML::Key << "grid" << YAML::Value << YAML::Flow << s.sweep->grid;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace d2dcache::cli
