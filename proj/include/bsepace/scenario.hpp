#pragma once

// Declarative scenario files (YAML). Needs yaml-cpp at link time.

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bsepace/bse.hpp"
#include "bsepace/errors.hpp"
#include "bsepace/model.hpp"
#include "bsepace/sim.hpp"
#include "bsepace/strategies.hpp"

namespace bsepace {

struct MarginalSpec {
  std::string kind = "uniform";  // uniform | point | discrete | power-half
  double value = 0.0;
  std::vector<double> values;
  std::vector<double> probs;
  double delta = 0.0;
  bool operator==(const MarginalSpec&) const = default;
};

struct AtomSpec {
  double v_L = 0.0;
  double v_O = 0.0;
  double p = 0.0;
  bool operator==(const AtomSpec&) const = default;
};

struct DistSpec {
  std::string kind = "independent-uniform";  // | discrete-joint | product | delta-cdf
  std::vector<AtomSpec> atoms;
  MarginalSpec learner;
  MarginalSpec optimizer;
  double delta = 0.0;
  bool operator==(const DistSpec&) const = default;
};

struct PolicySpec {
  std::string family = "constant";  // constant | affine | piecewise | mirror | zero
  double value = 0.0;
  double a = 0.0, b = 0.0, lo = 0.0, hi = BidPolicy::kDefaultCap;
  std::vector<double> breaks;
  std::vector<double> values;
  double cap = BidPolicy::kDefaultCap;
  bool operator==(const PolicySpec&) const = default;
};

struct WeightedPolicy {
  double weight = 1.0;
  PolicySpec policy;
  bool operator==(const WeightedPolicy&) const = default;
};

struct PhaseSpec {
  double fraction = 1.0;
  std::vector<WeightedPolicy> mixture;
  bool operator==(const PhaseSpec&) const = default;
};

struct StrategySpec {
  std::string name;
  std::string kind = "static";  // static | phases | appendix-e | bse
  std::vector<PhaseSpec> phases;  // static: one phase
  bool guard = false;
  double delta = 0.0;             // appendix-e; 0: the distribution's δ
  double mu = 0.0;                // appendix-e; 0: solve for it
  std::int64_t tau = -1;          // appendix-e; -1: leading-order switch time
  bool operator==(const StrategySpec&) const = default;
};

struct SimSpec {
  std::int64_t T = 10000;
  std::string eta = "T^{-2/3}";
  double lambda_initial = 0.0;
  std::uint64_t seed = 1;
  std::int64_t replications = 1;
  bool record_trajectory = false;
  std::int64_t trajectory_stride = 0;
  bool operator==(const SimSpec&) const = default;
};

struct SolverSpec {
  double cap = BidPolicy::kDefaultCap;
  std::int64_t lambda_points = 64;
  double lambda_max = 0.0;
  bool operator==(const SolverSpec&) const = default;
};

struct DualSpec {
  double eta = 1e-3;
  double sigma = 0.0;  // 0: √η
  std::int64_t tau_max = 2000;
  double diag_lambda_max = 100.0;
  bool operator==(const DualSpec&) const = default;
};

struct GameSpec {
  Matrix U_O;
  Matrix U_L;
  std::vector<Matrix> P;
  std::vector<double> rho;
  bool operator==(const GameSpec&) const = default;
};

struct Scenario {
  std::string name;
  std::string format = "second-price";
  DistSpec distribution;
  double rho_L = 1.0;
  double rho_O = 1.0;
  std::string rho_O_rule;  // "counterexample": δ/(8(1+δ)) from the distribution's δ
  SimSpec sim;
  std::vector<StrategySpec> strategies;
  std::string strategy;  // default selection by name
  SolverSpec solver;
  DualSpec dual;
  std::optional<GameSpec> game;
  std::string output_dir = "out";
  bool operator==(const Scenario&) const = default;
};

namespace detail {

/// Number or fraction "a/b".
inline double parse_number(const std::string& s, const std::string& where) {
  auto whole = [&](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < t.size() && t[used] == ' ') ++used;
    if (used == 0 || used != t.size()) throw Error(ErrorKind::ConfigError, where + ": not a number: '" + s + "'");
    return v;
  };
  const auto slash = s.find('/');
  if (slash == std::string::npos) return whole(s);
  const double den = whole(s.substr(slash + 1));
  if (den == 0.0) throw Error(ErrorKind::ConfigError, where + ": zero denominator");
  return whole(s.substr(0, slash)) / den;
}

inline double num(const YAML::Node& n, const std::string& where) {
  if (!n.IsScalar()) throw Error(ErrorKind::ConfigError, where + ": expected a number");
  return parse_number(n.Scalar(), where);
}

inline double num_or(const YAML::Node& parent, const char* key, double dflt, const std::string& where) {
  const auto n = parent[key];
  return n ? num(n, where + "." + key) : dflt;
}

inline std::int64_t int_or(const YAML::Node& parent, const char* key, std::int64_t dflt, const std::string& where) {
  const auto n = parent[key];
  if (!n) return dflt;
  const double v = num(n, where + "." + key);
  if (v != std::floor(v) || std::abs(v) > 9e15) {
    throw Error(ErrorKind::ConfigError, where + "." + key + ": expected an integer");
  }
  return static_cast<std::int64_t>(v);
}

inline std::string str_or(const YAML::Node& parent, const char* key, const std::string& dflt) {
  const auto n = parent[key];
  if (!n) return dflt;
  if (!n.IsScalar()) throw Error(ErrorKind::ConfigError, std::string(key) + ": expected a string");
  return n.Scalar();
}

inline bool bool_or(const YAML::Node& parent, const char* key, bool dflt) {
  const auto n = parent[key];
  if (!n) return dflt;
  try {
    return n.as<bool>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorKind::ConfigError, std::string(key) + ": expected true or false");
  }
}

inline std::vector<double> vec(const YAML::Node& n, const std::string& where) {
  std::vector<double> out;
  if (!n) return out;
  if (!n.IsSequence()) throw Error(ErrorKind::ConfigError, where + ": expected a list");
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(num(n[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline Matrix matrix(const YAML::Node& n, const std::string& where) {
  Matrix out;
  if (!n || !n.IsSequence()) throw Error(ErrorKind::ConfigError, where + ": expected a list of rows");
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(vec(n[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline void check_keys(const YAML::Node& n, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!n.IsMap()) throw Error(ErrorKind::ConfigError, where + ": expected a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.Scalar();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorKind::ConfigError, where + ": unknown key '" + key + "'");
  }
}

inline void check_choice(const std::string& v, std::initializer_list<const char*> allowed, const std::string& where) {
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return;
    list += list.empty() ? a : std::string(", ") + a;
  }
  throw Error(ErrorKind::ConfigError, where + ": '" + v + "' is not one of " + list);
}

inline MarginalSpec parse_marginal(const YAML::Node& n, const std::string& where) {
  check_keys(n, {"kind", "value", "values", "probs", "delta"}, where);
  MarginalSpec m;
  m.kind = str_or(n, "kind", m.kind);
  check_choice(m.kind, {"uniform", "point", "discrete", "power-half"}, where + ".kind");
  m.value = num_or(n, "value", 0.0, where);
  m.values = vec(n["values"], where + ".values");
  m.probs = vec(n["probs"], where + ".probs");
  m.delta = num_or(n, "delta", 0.0, where);
  return m;
}

inline DistSpec parse_dist(const YAML::Node& n) {
  const std::string w = "distribution";
  check_keys(n, {"kind", "atoms", "learner", "optimizer", "delta"}, w);
  DistSpec d;
  d.kind = str_or(n, "kind", d.kind);
  check_choice(d.kind, {"independent-uniform", "discrete-joint", "product", "delta-cdf"}, w + ".kind");
  if (const auto a = n["atoms"]) {
    if (!a.IsSequence()) throw Error(ErrorKind::ConfigError, w + ".atoms: expected a list");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string wi = w + ".atoms[" + std::to_string(i) + "]";
      check_keys(a[i], {"v_L", "v_O", "p"}, wi);
      d.atoms.push_back({num_or(a[i], "v_L", 0.0, wi), num_or(a[i], "v_O", 0.0, wi), num_or(a[i], "p", 0.0, wi)});
    }
  }
  if (n["learner"]) d.learner = parse_marginal(n["learner"], w + ".learner");
  if (n["optimizer"]) d.optimizer = parse_marginal(n["optimizer"], w + ".optimizer");
  d.delta = num_or(n, "delta", 0.0, w);
  return d;
}

inline PolicySpec parse_policy(const YAML::Node& n, const std::string& where) {
  check_keys(n, {"family", "value", "a", "b", "lo", "hi", "breaks", "values", "cap"}, where);
  PolicySpec p;
  p.family = str_or(n, "family", p.family);
  check_choice(p.family, {"constant", "affine", "piecewise", "mirror", "zero"}, where + ".family");
  p.value = num_or(n, "value", 0.0, where);
  p.a = num_or(n, "a", 0.0, where);
  p.b = num_or(n, "b", 0.0, where);
  p.lo = num_or(n, "lo", 0.0, where);
  p.hi = num_or(n, "hi", BidPolicy::kDefaultCap, where);
  p.breaks = vec(n["breaks"], where + ".breaks");
  p.values = vec(n["values"], where + ".values");
  p.cap = num_or(n, "cap", BidPolicy::kDefaultCap, where);
  return p;
}

inline std::vector<WeightedPolicy> parse_mixture(const YAML::Node& n, const std::string& where) {
  std::vector<WeightedPolicy> out;
  if (!n.IsSequence()) throw Error(ErrorKind::ConfigError, where + ": expected a list");
  for (std::size_t i = 0; i < n.size(); ++i) {
    const std::string wi = where + "[" + std::to_string(i) + "]";
    check_keys(n[i], {"weight", "policy"}, wi);
    out.push_back({num_or(n[i], "weight", 1.0, wi), parse_policy(n[i]["policy"], wi + ".policy")});
  }
  return out;
}

inline StrategySpec parse_strategy(const std::string& name, const YAML::Node& n) {
  const std::string w = "strategies." + name;
  check_keys(n, {"kind", "policy", "mixture", "phases", "guard", "delta", "mu", "tau"}, w);
  StrategySpec s;
  s.name = name;
  s.kind = str_or(n, "kind", s.kind);
  check_choice(s.kind, {"static", "phases", "appendix-e", "bse"}, w + ".kind");
  if (n["policy"]) s.phases.push_back({1.0, {{1.0, parse_policy(n["policy"], w + ".policy")}}});
  if (n["mixture"]) s.phases.push_back({1.0, parse_mixture(n["mixture"], w + ".mixture")});
  if (const auto ph = n["phases"]) {
    if (!ph.IsSequence()) throw Error(ErrorKind::ConfigError, w + ".phases: expected a list");
    for (std::size_t i = 0; i < ph.size(); ++i) {
      const std::string wi = w + ".phases[" + std::to_string(i) + "]";
      check_keys(ph[i], {"fraction", "mixture"}, wi);
      s.phases.push_back({num_or(ph[i], "fraction", 0.0, wi), parse_mixture(ph[i]["mixture"], wi + ".mixture")});
    }
  }
  s.guard = bool_or(n, "guard", false);
  s.delta = num_or(n, "delta", 0.0, w);
  s.mu = num_or(n, "mu", 0.0, w);
  s.tau = int_or(n, "tau", -1, w);
  return s;
}

}  // namespace detail

/// Recomputes ρ_O when it is given by a named rule.
inline void apply_budget_rule(Scenario& s) {
  if (s.rho_O_rule.empty()) return;
  if (s.rho_O_rule != "counterexample") throw Error(ErrorKind::ConfigError, "unknown budget rule '" + s.rho_O_rule + "'");
  const double d = s.distribution.delta;
  if (s.distribution.kind != "delta-cdf" || !(d > 0.0 && d < 1.0)) {
    throw Error(ErrorKind::ConfigError, "budget rule 'counterexample' needs a delta-cdf distribution");
  }
  s.rho_O = d / (8.0 * (1.0 + d));
}

inline Scenario parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("YAML parse error: ") + e.what());
  }
  using namespace detail;
  check_keys(root,
             {"name", "format", "distribution", "budgets", "simulation", "strategies", "strategy", "solver", "dual",
              "game", "output"},
             "scenario");
  Scenario s;
  s.name = str_or(root, "name", "");
  if (s.name.empty()) throw Error(ErrorKind::ConfigError, "scenario: missing name");
  s.format = str_or(root, "format", s.format);
  if (s.format != "second-price" && s.format != "first-price") {
    throw Error(ErrorKind::ConfigError, "format: expected second-price or first-price");
  }
  if (root["distribution"]) s.distribution = parse_dist(root["distribution"]);
  if (const auto b = root["budgets"]) {
    check_keys(b, {"rho_L", "rho_O"}, "budgets");
    s.rho_L = num_or(b, "rho_L", 1.0, "budgets");
    if (b["rho_O"] && b["rho_O"].IsScalar() && b["rho_O"].Scalar() == "counterexample") {
      s.rho_O_rule = "counterexample";
    } else {
      s.rho_O = num_or(b, "rho_O", 1.0, "budgets");
    }
  }
  if (const auto m = root["simulation"]) {
    check_keys(m, {"T", "eta", "lambda_initial", "seed", "replications", "record_trajectory", "trajectory_stride"},
               "simulation");
    s.sim.T = int_or(m, "T", s.sim.T, "simulation");
    s.sim.eta = str_or(m, "eta", s.sim.eta);
    s.sim.lambda_initial = num_or(m, "lambda_initial", 0.0, "simulation");
    if (const auto sd = m["seed"]) {
      try {
        s.sim.seed = sd.as<std::uint64_t>();
      } catch (const YAML::Exception&) {
        throw Error(ErrorKind::ConfigError, "simulation.seed: expected a non-negative integer");
      }
    }
    s.sim.replications = int_or(m, "replications", 1, "simulation");
    s.sim.record_trajectory = bool_or(m, "record_trajectory", false);
    s.sim.trajectory_stride = int_or(m, "trajectory_stride", 0, "simulation");
  }
  if (const auto st = root["strategies"]) {
    if (!st.IsMap()) throw Error(ErrorKind::ConfigError, "strategies: expected a mapping of name to strategy");
    for (const auto& kv : st) s.strategies.push_back(parse_strategy(kv.first.Scalar(), kv.second));
  }
  s.strategy = str_or(root, "strategy", s.strategies.empty() ? "" : s.strategies.front().name);
  if (const auto v = root["solver"]) {
    check_keys(v, {"cap", "lambda_points", "lambda_max"}, "solver");
    s.solver.cap = num_or(v, "cap", s.solver.cap, "solver");
    s.solver.lambda_points = int_or(v, "lambda_points", s.solver.lambda_points, "solver");
    s.solver.lambda_max = num_or(v, "lambda_max", 0.0, "solver");
  }
  if (const auto v = root["dual"]) {
    check_keys(v, {"eta", "sigma", "tau_max", "diag_lambda_max"}, "dual");
    s.dual.eta = num_or(v, "eta", s.dual.eta, "dual");
    s.dual.sigma = num_or(v, "sigma", 0.0, "dual");
    s.dual.tau_max = int_or(v, "tau_max", s.dual.tau_max, "dual");
    s.dual.diag_lambda_max = num_or(v, "diag_lambda_max", s.dual.diag_lambda_max, "dual");
  }
  if (const auto g = root["game"]) {
    check_keys(g, {"U_O", "U_L", "P", "rho"}, "game");
    GameSpec gs;
    gs.U_O = matrix(g["U_O"], "game.U_O");
    gs.U_L = g["U_L"] ? matrix(g["U_L"], "game.U_L") : gs.U_O;
    if (const auto P = g["P"]) {
      if (!P.IsSequence()) throw Error(ErrorKind::ConfigError, "game.P: expected a list of matrices");
      for (std::size_t i = 0; i < P.size(); ++i) gs.P.push_back(matrix(P[i], "game.P[" + std::to_string(i) + "]"));
    }
    gs.rho = vec(g["rho"], "game.rho");
    s.game = gs;
  }
  if (const auto o = root["output"]) {
    check_keys(o, {"dir"}, "output");
    s.output_dir = str_or(o, "dir", s.output_dir);
  }
  if (s.sim.T < 1) throw Error(ErrorKind::ConfigError, "simulation.T: must be >= 1");
  if (s.sim.replications < 1) throw Error(ErrorKind::ConfigError, "simulation.replications: must be >= 1");
  if (s.sim.trajectory_stride < 0) throw Error(ErrorKind::ConfigError, "simulation.trajectory_stride: must be >= 0");
  if (!(s.sim.lambda_initial >= 0.0)) throw Error(ErrorKind::ConfigError, "simulation.lambda_initial: must be >= 0");
  if (!(s.rho_L > 0.0)) throw Error(ErrorKind::ConfigError, "budgets.rho_L: must be positive");
  if (s.rho_O_rule.empty() && !(s.rho_O >= 0.0)) throw Error(ErrorKind::ConfigError, "budgets.rho_O: must be >= 0");
  if (s.dual.tau_max < 1) throw Error(ErrorKind::ConfigError, "dual.tau_max: must be >= 1");
  if (!(s.dual.eta > 0.0 && s.dual.eta < 1.0)) throw Error(ErrorKind::ConfigError, "dual.eta: must lie in (0, 1)");
  if (!(s.dual.sigma >= 0.0)) throw Error(ErrorKind::ConfigError, "dual.sigma: must be >= 0");
  apply_budget_rule(s);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void emit_vec(YAML::Emitter& e, const std::vector<double>& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (double x : v) e << fmt_double(x);
  e << YAML::EndSeq;
}

inline void emit_matrix(YAML::Emitter& e, const Matrix& m) {
  e << YAML::BeginSeq;
  for (const auto& r : m) emit_vec(e, r);
  e << YAML::EndSeq;
}

inline void emit_marginal(YAML::Emitter& e, const MarginalSpec& m) {
  e << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << m.kind;
  e << YAML::Key << "value" << YAML::Value << fmt_double(m.value);
  e << YAML::Key << "values" << YAML::Value;
  emit_vec(e, m.values);
  e << YAML::Key << "probs" << YAML::Value;
  emit_vec(e, m.probs);
  e << YAML::Key << "delta" << YAML::Value << fmt_double(m.delta) << YAML::EndMap;
}

inline void emit_policy(YAML::Emitter& e, const PolicySpec& p) {
  e << YAML::BeginMap << YAML::Key << "family" << YAML::Value << p.family;
  e << YAML::Key << "value" << YAML::Value << fmt_double(p.value);
  e << YAML::Key << "a" << YAML::Value << fmt_double(p.a);
  e << YAML::Key << "b" << YAML::Value << fmt_double(p.b);
  e << YAML::Key << "lo" << YAML::Value << fmt_double(p.lo);
  e << YAML::Key << "hi" << YAML::Value << fmt_double(p.hi);
  e << YAML::Key << "breaks" << YAML::Value;
  emit_vec(e, p.breaks);
  e << YAML::Key << "values" << YAML::Value;
  emit_vec(e, p.values);
  e << YAML::Key << "cap" << YAML::Value << fmt_double(p.cap) << YAML::EndMap;
}

inline void emit_mixture(YAML::Emitter& e, const std::vector<WeightedPolicy>& m) {
  e << YAML::BeginSeq;
  for (const auto& w : m) {
    e << YAML::BeginMap << YAML::Key << "weight" << YAML::Value << fmt_double(w.weight);
    e << YAML::Key << "policy" << YAML::Value;
    emit_policy(e, w.policy);
    e << YAML::EndMap;
  }
  e << YAML::EndSeq;
}

}  // namespace detail

/// Canonical YAML for a scenario; parse_scenario(emit_scenario(s)) == s.
inline std::string emit_scenario(const Scenario& s) {
  using namespace detail;
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "name" << YAML::Value << s.name;
  e << YAML::Key << "format" << YAML::Value << s.format;
  e << YAML::Key << "distribution" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << s.distribution.kind;
  e << YAML::Key << "atoms" << YAML::Value << YAML::BeginSeq;
  for (const auto& a : s.distribution.atoms) {
    e << YAML::Flow << YAML::BeginMap << YAML::Key << "v_L" << YAML::Value << fmt_double(a.v_L) << YAML::Key << "v_O"
      << YAML::Value << fmt_double(a.v_O) << YAML::Key << "p" << YAML::Value << fmt_double(a.p) << YAML::EndMap;
  }
  e << YAML::EndSeq;
  e << YAML::Key << "learner" << YAML::Value;
  emit_marginal(e, s.distribution.learner);
  e << YAML::Key << "optimizer" << YAML::Value;
  emit_marginal(e, s.distribution.optimizer);
  e << YAML::Key << "delta" << YAML::Value << fmt_double(s.distribution.delta);
  e << YAML::EndMap;
  e << YAML::Key << "budgets" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "rho_L" << YAML::Value << fmt_double(s.rho_L);
  e << YAML::Key << "rho_O" << YAML::Value << (s.rho_O_rule.empty() ? fmt_double(s.rho_O) : s.rho_O_rule);
  e << YAML::EndMap;
  e << YAML::Key << "simulation" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "T" << YAML::Value << s.sim.T;
  e << YAML::Key << "eta" << YAML::Value << s.sim.eta;
  e << YAML::Key << "lambda_initial" << YAML::Value << fmt_double(s.sim.lambda_initial);
  e << YAML::Key << "seed" << YAML::Value << s.sim.seed;
  e << YAML::Key << "replications" << YAML::Value << s.sim.replications;
  e << YAML::Key << "record_trajectory" << YAML::Value << s.sim.record_trajectory;
  e << YAML::Key << "trajectory_stride" << YAML::Value << s.sim.trajectory_stride << YAML::EndMap;
  e << YAML::Key << "strategies" << YAML::Value << YAML::BeginMap;
  for (const auto& st : s.strategies) {
    e << YAML::Key << st.name << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "kind" << YAML::Value << st.kind;
    e << YAML::Key << "phases" << YAML::Value << YAML::BeginSeq;
    for (const auto& ph : st.phases) {
      e << YAML::BeginMap << YAML::Key << "fraction" << YAML::Value << fmt_double(ph.fraction);
      e << YAML::Key << "mixture" << YAML::Value;
      emit_mixture(e, ph.mixture);
      e << YAML::EndMap;
    }
    e << YAML::EndSeq;
    e << YAML::Key << "guard" << YAML::Value << st.guard;
    e << YAML::Key << "delta" << YAML::Value << fmt_double(st.delta);
    e << YAML::Key << "mu" << YAML::Value << fmt_double(st.mu);
    e << YAML::Key << "tau" << YAML::Value << st.tau << YAML::EndMap;
  }
  e << YAML::EndMap;
  e << YAML::Key << "strategy" << YAML::Value << s.strategy;
  e << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "cap" << YAML::Value << fmt_double(s.solver.cap);
  e << YAML::Key << "lambda_points" << YAML::Value << s.solver.lambda_points;
  e << YAML::Key << "lambda_max" << YAML::Value << fmt_double(s.solver.lambda_max) << YAML::EndMap;
  e << YAML::Key << "dual" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "eta" << YAML::Value << fmt_double(s.dual.eta);
  e << YAML::Key << "sigma" << YAML::Value << fmt_double(s.dual.sigma);
  e << YAML::Key << "tau_max" << YAML::Value << s.dual.tau_max;
  e << YAML::Key << "diag_lambda_max" << YAML::Value << fmt_double(s.dual.diag_lambda_max) << YAML::EndMap;
  if (s.game) {
    e << YAML::Key << "game" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "U_O" << YAML::Value;
    emit_matrix(e, s.game->U_O);
    e << YAML::Key << "U_L" << YAML::Value;
    emit_matrix(e, s.game->U_L);
    e << YAML::Key << "P" << YAML::Value << YAML::BeginSeq;
    for (const auto& m : s.game->P) emit_matrix(e, m);
    e << YAML::EndSeq;
    e << YAML::Key << "rho" << YAML::Value;
    emit_vec(e, s.game->rho);
    e << YAML::EndMap;
  }
  e << YAML::Key << "output" << YAML::Value << YAML::BeginMap << YAML::Key << "dir" << YAML::Value << s.output_dir
    << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Building model objects

inline AuctionFormat build_format(const Scenario& s) {
  return s.format == "first-price" ? AuctionFormat::FirstPrice : AuctionFormat::SecondPrice;
}

inline Marginal build_marginal(const MarginalSpec& m) {
  if (m.kind == "uniform") return Marginal::uniform();
  if (m.kind == "point") return Marginal::point(m.value);
  if (m.kind == "discrete") return Marginal::discrete(m.values, m.probs);
  if (m.kind == "power-half") return Marginal::power_half(m.delta);
  throw Error(ErrorKind::ConfigError, "unknown marginal kind '" + m.kind + "'");
}

inline ValueDistribution build_distribution(const DistSpec& d) {
  if (d.kind == "independent-uniform") return ValueDistribution::independent_uniform();
  if (d.kind == "discrete-joint") {
    std::vector<JointAtom> atoms;
    for (const auto& a : d.atoms) atoms.push_back({a.v_L, a.v_O, a.p});
    return ValueDistribution::discrete_joint(std::move(atoms));
  }
  if (d.kind == "product") return ValueDistribution::product(build_marginal(d.learner), build_marginal(d.optimizer));
  if (d.kind == "delta-cdf") return ValueDistribution::delta_cdf_example(d.delta);
  throw Error(ErrorKind::ConfigError, "unknown distribution kind '" + d.kind + "'");
}

inline BidPolicy build_policy(const PolicySpec& p) {
  if (p.family == "constant") return BidPolicy::constant(p.value, p.cap);
  if (p.family == "affine") return BidPolicy::affine(p.a, p.b, p.lo, p.hi, p.cap);
  if (p.family == "piecewise") return BidPolicy::piecewise(p.breaks, p.values, p.cap);
  if (p.family == "mirror") return BidPolicy::mirror(p.cap);
  if (p.family == "zero") return BidPolicy::zero(p.cap);
  throw Error(ErrorKind::ConfigError, "unknown policy family '" + p.family + "'");
}

inline Mixture build_mixture(const std::vector<WeightedPolicy>& m) {
  Mixture out;
  for (const auto& w : m) out.push_back({w.weight, build_policy(w.policy)});
  return out;
}

inline AuctionBseProblem build_problem(const Scenario& s) {
  AuctionBseProblem p{build_distribution(s.distribution), build_format(s), s.rho_L, s.rho_O, {}, {}, {}};
  p.opts.cap = s.solver.cap;
  p.opts.lambda_points = static_cast<std::size_t>(std::max<std::int64_t>(8, s.solver.lambda_points));
  p.opts.lambda_max = s.solver.lambda_max;
  return p;
}

inline FiniteGame build_game(const Scenario& s) {
  if (!s.game) throw Error(ErrorKind::ConfigError, "scenario '" + s.name + "' has no game section");
  FiniteGame g{s.game->U_O, s.game->U_L, s.game->P, s.game->rho};
  g.validate();
  return g;
}

inline const StrategySpec& find_strategy(const Scenario& s, const std::string& name) {
  const std::string want = name.empty() ? s.strategy : name;
  for (const auto& st : s.strategies) {
    if (st.name == want) return st;
  }
  std::string names;
  for (const auto& st : s.strategies) names += (names.empty() ? "" : ", ") + st.name;
  throw Error(ErrorKind::ConfigError,
              "scenario '" + s.name + "' has no strategy '" + want + "' (available: " + names + ")");
}

inline OptimizerStrategy build_strategy(const Scenario& s, const StrategySpec& st, double eta, std::int64_t T) {
  OptimizerStrategy out = OptimizerStrategy::static_policy(BidPolicy::zero());
  if (st.kind == "static") {
    if (st.phases.size() != 1) throw Error(ErrorKind::ConfigError, "static strategy needs one policy or mixture");
    out = OptimizerStrategy::static_mixture(build_mixture(st.phases.front().mixture));
  } else if (st.kind == "phases") {
    std::vector<SchedulePhase> ph;
    for (const auto& p : st.phases) ph.push_back({p.fraction, build_mixture(p.mixture)});
    out = OptimizerStrategy::phase_schedule(std::move(ph));
  } else if (st.kind == "appendix-e") {
    const double delta = st.delta > 0.0 ? st.delta : s.distribution.delta;
    double mu = st.mu;
    if (!(mu > 0.0)) mu = dual_opt(build_problem(s)).mu;
    const std::int64_t tau = st.tau >= 0 ? st.tau : switch_time_tau(delta, eta, T);
    out = OptimizerStrategy::appendix_e(delta, mu, tau);
  } else if (st.kind == "bse") {
    out = bse_schedule(auction_bse(build_problem(s)));
  } else {
    throw Error(ErrorKind::ConfigError, "unknown strategy kind '" + st.kind + "'");
  }
  return st.guard ? OptimizerStrategy::budget_guard(std::move(out)) : out;
}

inline SimConfig build_sim_config(const Scenario& s, const std::string& strategy_name = "") {
  SimConfig c;
  c.dist = build_distribution(s.distribution);
  c.fmt = build_format(s);
  c.T = s.sim.T;
  c.eta = resolve_eta(s.sim.eta, s.sim.T);
  c.eta_rule = s.sim.eta;
  c.rho_L = s.rho_L;
  c.rho_O = s.rho_O;
  c.lambda_initial = s.sim.lambda_initial;
  c.seed = s.sim.seed;
  c.record_trajectory = s.sim.record_trajectory;
  c.trajectory_stride = s.sim.trajectory_stride;
  c.strategy = build_strategy(s, find_strategy(s, strategy_name), c.eta, c.T);
  c.validate();
  return c;
}

}  // namespace bsepace
