// bsepace: simulate, solve, dual, reproduce.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bsepace/bse.hpp"
#include "bsepace/dual.hpp"
#include "bsepace/report.hpp"
#include "bsepace/scenario.hpp"
#include "bsepace/sim.hpp"

#ifndef BSEPACE_SCENARIO_DIR
#define BSEPACE_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace bsepace;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitCertification = 4;

struct Overrides {
  std::string scenario;
  std::string out;
  std::optional<double> T;
  std::optional<std::string> eta;
  std::optional<double> delta;
  std::optional<double> rho;
  std::optional<double> rho_L;
  std::optional<std::uint64_t> seed;
};

Scenario resolve_scenario(const Overrides& o) {
  if (o.scenario.empty()) throw Error(ErrorKind::ConfigError, "--scenario is required");
  std::vector<fs::path> tries{o.scenario};
  for (const fs::path& dir : {fs::path("scenarios"), fs::path(BSEPACE_SCENARIO_DIR)}) {
    tries.push_back(dir / o.scenario);
    tries.push_back(dir / (o.scenario + ".yaml"));
  }
  Scenario s;
  bool found = false;
  for (const auto& p : tries) {
    if (fs::is_regular_file(p)) {
      s = load_scenario(p.string());
      found = true;
      break;
    }
  }
  if (!found) throw Error(ErrorKind::ConfigError, "scenario '" + o.scenario + "' not found");
  if (o.T) {
    if (*o.T < 1 || *o.T != std::floor(*o.T)) throw Error(ErrorKind::ConfigError, "--T must be a positive integer");
    s.sim.T = static_cast<std::int64_t>(*o.T);
  }
  if (o.eta) s.sim.eta = *o.eta;
  if (o.delta) {
    s.distribution.delta = *o.delta;
    for (auto& st : s.strategies) {
      if (st.kind == "appendix-e") {
        st.delta = 0.0;
        st.mu = 0.0;
      }
    }
  }
  if (o.rho) {
    s.rho_O = *o.rho;
    s.rho_O_rule.clear();
    if (s.game && !s.game->rho.empty()) s.game->rho[0] = *o.rho;
  }
  if (o.rho_L) s.rho_L = *o.rho_L;
  if (o.seed) s.sim.seed = *o.seed;
  if (!o.out.empty()) s.output_dir = o.out;
  apply_budget_rule(s);
  return s;
}

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--scenario,-s", o.scenario, "scenario name or YAML path")->required();
  app->add_option("--out,-o", o.out, "output directory (default: the scenario's)");
  app->add_option("--T", o.T, "horizon");
  app->add_option("--eta", o.eta, "learning rate or rule such as T^{-2/3}");
  app->add_option("--delta", o.delta, "delta of a delta-cdf distribution");
  app->add_option("--rho", o.rho, "optimizer budget per round (first budget of a finite game)");
  app->add_option("--rho-L", o.rho_L, "learner budget per round");
  app->add_option("--seed", o.seed, "base seed");
}

std::string header_line(const std::string& cmd, const Scenario& s) {
  std::ostringstream os;
  os << "bsepace " << cmd << " scenario=" << s.name << " seed=" << s.sim.seed;
  return os.str();
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const Overrides& o, const std::string& strategy, std::int64_t reps, bool trajectory) {
  Scenario s = resolve_scenario(o);
  if (reps > 0) s.sim.replications = reps;
  if (trajectory) s.sim.record_trajectory = true;
  const SimConfig cfg = build_sim_config(s, strategy);
  if (!cfg.budget_safe_start()) {
    std::cerr << "warning: lambda_initial > rho_L, the learner's budget is no longer guaranteed\n";
  }
  const auto& st = find_strategy(s, strategy);
  const auto sum = replicate(cfg, static_cast<std::size_t>(std::max<std::int64_t>(1, s.sim.replications)));

  CsvTable t({"scenario", "strategy", "seed", "T", "eta", "optimizer_value", "optimizer_spend", "learner_value",
              "learner_spend", "lambda_final", "optimizer_value_per_round", "learner_violations",
              "optimizer_violations"});
  t.comment(header_line("simulate", s) + " strategy=" + st.name + " eta_rule=" + s.sim.eta);
  for (std::size_t i = 0; i < sum.runs.size(); ++i) {
    const auto& r = sum.runs[i];
    t.row({s.name, st.name, static_cast<std::int64_t>(sum.seeds[i]), r.T, r.eta, r.optimizer_total_value,
           r.optimizer_total_spend, r.learner_total_value, r.learner_total_spend, r.lambda_final,
           r.optimizer_value_per_round(), r.learner_violation_rounds, r.optimizer_violation_rounds});
  }
  const fs::path dir(s.output_dir);
  const auto file = dir / (s.name + "-simulate-" + st.name + ".csv");
  t.write(file);
  if (s.sim.record_trajectory) {
    CsvTable tr({"seed", "t", "lambda", "optimizer_value", "optimizer_spend", "learner_spend"});
    tr.comment(header_line("simulate", s) + " strategy=" + st.name);
    for (std::size_t i = 0; i < sum.runs.size(); ++i) {
      for (const auto& p : sum.runs[i].trajectory) {
        tr.row({static_cast<std::int64_t>(sum.seeds[i]), p.t, p.lambda, p.optimizer_value, p.optimizer_spend,
                p.learner_spend});
      }
    }
    tr.write(dir / (s.name + "-trajectory-" + st.name + ".csv"));
  }
  std::printf("scenario %s, strategy %s (%s), T=%lld, eta=%.6g, %zu run(s)\n", s.name.c_str(), st.name.c_str(),
              cfg.strategy.describe().c_str(), static_cast<long long>(cfg.T), cfg.eta, sum.runs.size());
  std::printf("optimizer value per round: %.6f (stderr %.2g)\n", sum.optimizer_value_per_round.mean,
              sum.optimizer_value_per_round.stderr_);
  std::printf("optimizer spend per round: %.6f (budget %.6f)\n", sum.optimizer_spend_per_round.mean, cfg.rho_O);
  std::printf("learner spend per round:   %.6f (budget %.6f)\n", sum.learner_spend_per_round.mean, cfg.rho_L);
  std::printf("final multiplier:          %.6f\n", sum.lambda_final.mean);
  std::printf("wrote %s\n", file.string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// solve

int solve_game(const Scenario& s) {
  const FiniteGame g = build_game(s);
  const auto se = se_value(g, g.rho);
  const auto b = bse_finite(g);
  CsvTable t({"scenario", "kind", "weight", "leader_mix", "follower", "value", "spend"});
  t.comment(header_line("solve", s));
  auto mix = [](const std::vector<double>& x) {
    std::string out;
    for (double v : x) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.9g", v);
      out += (out.empty() ? "" : " ") + std::string(buf);
    }
    return out;
  };
  t.row({s.name, std::string("se"), 1.0, mix(se.x), static_cast<std::int64_t>(se.b), se.value, se.spend[0]});
  for (const auto& ph : b.phases) {
    t.row({s.name, std::string("bse-phase"), ph.z, mix(ph.x), static_cast<std::int64_t>(ph.b), ph.value, ph.spend[0]});
  }
  const auto file = fs::path(s.output_dir) / (s.name + "-solve.csv");
  t.write(file);
  std::printf("finite game %s, budget %.6g\n", s.name.c_str(), g.rho[0]);
  std::printf("SE  = %.9f\n", se.value);
  std::printf("BSE = %.9f with %zu phase(s)\n", b.value, b.phases.size());
  for (const auto& ph : b.phases) {
    std::printf("  weight %.6f: leader [%s], follower column %zu, value %.6f, spend %.6f\n", ph.z, mix(ph.x).c_str(),
                ph.b, ph.value, ph.spend[0]);
  }
  std::printf("wrote %s\n", file.string().c_str());
  return kExitOk;
}

std::string mixture_text(const Mixture& raw) {
  // Atoms that print the same are merged.
  std::vector<std::pair<double, std::string>> m;
  for (const auto& [w, p] : raw) {
    const auto d = p.describe();
    auto it = std::find_if(m.begin(), m.end(), [&](const auto& e) { return e.second == d; });
    if (it == m.end()) {
      m.push_back({w, d});
    } else {
      it->first += w;
    }
  }
  std::string out;
  for (const auto& [w, p] : m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g*", w);
    out += (out.empty() ? "" : " + ") + std::string(m.size() > 1 ? buf : "") + p;
  }
  return out;
}

int solve_auction(const Scenario& s) {
  const AuctionEngine eng(build_problem(s));
  const auto b = auction_bse(eng);
  CsvTable t({"scenario", "weight", "lambda", "U", "P_O", "P_L", "spend", "null_phase", "policy"});
  t.comment(header_line("solve", s));
  t.comment("OPT=" + format_cell(b.dual.opt) + " mu=" + format_cell(b.dual.mu) + " R_star=" +
            format_cell(b.dual.r_star) + " value=" + format_cell(b.value));
  for (const auto& [q, ph] : b.phases) {
    t.row({s.name, q, ph.null_phase ? std::numeric_limits<double>::infinity() : ph.lambda, ph.triple.U, ph.triple.P_O,
           ph.triple.P_L, ph.spend(), static_cast<std::int64_t>(ph.null_phase), mixture_text(ph.mixture)});
  }
  const auto file = fs::path(s.output_dir) / (s.name + "-solve.csv");
  t.write(file);
  std::printf("auction %s (%s), rho_L=%.6g rho_O=%.6g\n", s.name.c_str(), s.format.c_str(), s.rho_L, s.rho_O);
  std::printf("OPT   = %.6f\nmu*   = %.6f\nR*    = %.6f\nBSE   = %.6f (spend %.6f, gap to dual %.2g)\n", b.dual.opt,
              b.dual.mu, b.dual.r_star, b.value, b.spend, b.duality_gap);
  for (const auto& [q, ph] : b.phases) {
    if (ph.null_phase) {
      std::printf("  weight %.6f: null phase (lambda -> inf, bid nothing above zero), value %.6f\n", q, ph.value());
    } else {
      std::printf("  weight %.6f: lambda %.6f, value %.6f, spend %.6f, policy %s\n", q, ph.lambda, ph.value(),
                  ph.spend(), mixture_text(ph.mixture).c_str());
    }
  }
  std::printf("wrote %s\n", file.string().c_str());
  return kExitOk;
}

int cmd_solve(const Overrides& o) {
  const Scenario s = resolve_scenario(o);
  return s.game ? solve_game(s) : solve_auction(s);
}

// ---------------------------------------------------------------------------
// dual

void write_curve(const DualCurve& c, const Scenario& s, const fs::path& file) {
  CsvTable t({"lambda", "g_star", "g_star_sigma", "G_sigma"});
  t.comment(header_line("dual", s) + " sigma=" + format_cell(c.sigma) + " mu=" + format_cell(c.mu) +
            " R_star=" + format_cell(c.R_star));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < c.lambda.size(); ++i) {
    t.row({c.lambda[i], c.g_star[i], c.bounded ? c.g_star_sigma[i] : nan, c.bounded ? c.G_sigma[i] : nan});
  }
  t.write(file);
}

int cmd_dual(const Overrides& o, std::optional<double> sigma, std::optional<double> dual_eta,
             std::optional<std::int64_t> tau_max, bool certify) {
  Scenario s = resolve_scenario(o);
  if (sigma) s.dual.sigma = *sigma;
  if (dual_eta) s.dual.eta = *dual_eta;
  if (tau_max) s.dual.tau_max = *tau_max;
  const double eta = s.dual.eta;
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorKind::ConfigError, "dual eta must lie in (0, 1)");
  const double sig = s.dual.sigma > 0.0 ? s.dual.sigma : std::sqrt(eta);
  const AuctionEngine eng(build_problem(s));
  const auto d = dual_opt(eng);
  CurveOptions co;
  co.diag_lambda_max = s.dual.diag_lambda_max;
  const auto c = dual_curve_unchecked(eng, d.mu, d.r_star, sig, co);
  const auto file = fs::path(s.output_dir) / (s.name + "-dual.csv");
  write_curve(c, s, file);
  std::printf("scenario %s: mu* = %.6f, R* = %.6f, g*(0) = %.6f, sigma = %.6g, eta = %.6g\n", s.name.c_str(), c.mu,
              c.R_star, c.g0, sig, eta);
  std::printf("wrote %s\n", file.string().c_str());
  if (!c.bounded) {
    std::printf("verdict: unbounded potential, manipulable regime (g* still %.6f at lambda = %.6g)\n",
                c.g_star.back(), c.lambda.back());
    return kExitOk;
  }
  const double A = separation_constant(c, eta, s.rho_L);
  std::printf("lambda_bar = %.6f%s\n", *c.lambda_bar, c.lambda_bar_scan_found ? " (scan-found)" : "");
  std::printf("A = R* + %.6g = %.6f\n", A - c.R_star, A);
  const auto& dist = eng.problem().dist;
  if (!certify) {
    std::printf("verdict: potential bounded; value iteration not requested\n");
    return kExitOk;
  }
  if (!dist.optimizer_discrete() || !dist.learner_discrete()) {
    std::printf("verdict: potential bounded; value iteration skipped (distribution is not discrete)\n");
    return kExitOk;
  }
  const auto table = dp_oracle(eng, c.mu, eta, c.lambda, static_cast<std::size_t>(s.dual.tau_max));
  const auto cert = certify_separation(c, table, eta, s.rho_L);
  CsvTable ct({"tau", "lambda", "R", "bound"});
  ct.comment(header_line("dual", s) + " A=" + format_cell(A) + " interp_tol=" + format_cell(cert.interp_tol));
  const std::size_t stride_tau = std::max<std::size_t>(1, table.R.size() / 50);
  const std::size_t stride_l = std::max<std::size_t>(1, table.checked_nodes / 50);
  for (std::size_t tau = 0; tau < table.R.size(); tau += stride_tau) {
    for (std::size_t i = 0; i < table.checked_nodes; i += stride_l) {
      const double G = curve_at(c.lambda, c.G_sigma, table.lambda[i]);
      ct.row({static_cast<std::int64_t>(tau), table.lambda[i], table.R[tau][i],
              A * double(tau) + G / eta + cert.interp_tol * double(tau)});
    }
  }
  const auto cfile = fs::path(s.output_dir) / (s.name + "-certificate.csv");
  ct.write(cfile);
  std::printf("value iteration: %zu cells, tau_max %lld, interp_tol %.3g, worst margin %.6g (without slack %.6g)\n",
              cert.cells, static_cast<long long>(s.dual.tau_max), cert.interp_tol, cert.worst_margin,
              cert.worst_strict);
  std::printf("wrote %s\n", cfile.string().c_str());
  if (!cert.pass) {
    std::printf("verdict: certification FAILED at tau=%zu lambda=%.6f\n", cert.worst_tau, cert.worst_lambda);
    return kExitCertification;
  }
  std::printf("verdict: certified: A = R* + %.6g, R_tau(lambda) <= A tau + G(lambda)/eta on every cell\n",
              A - c.R_star);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// reproduce

struct ReproduceOptions {
  std::string out = "out";
  std::vector<double> Ts{1e5, 3e5, 1e6};
  std::vector<double> deltas{0.01};
  std::int64_t seeds = 8;
  std::uint64_t seed = 1;
};

FiniteGame example_game(double rho) {
  return FiniteGame{{{3, 0}, {0, 1}}, {{3, 0}, {0, 1}}, {Matrix{{3, 0}, {0, 0}}}, {rho}};
}

std::vector<std::string> repro_fig_se_bse(const ReproduceOptions& r) {
  CsvTable t({"rho", "se", "bse"});
  t.comment("bsepace reproduce fig-SE-BSE seed=none");
  for (int i = 0; i <= 300; ++i) {
    const double rho = 0.01 * i;
    const auto g = example_game(rho);
    t.row({rho, se_value(g, rho).value, bse_finite(g).value});
  }
  const auto f = fs::path(r.out) / "fig-SE-BSE.csv";
  t.write(f);
  return {f.string()};
}

std::vector<std::string> repro_fig_feasible(const ReproduceOptions& r) {
  // Leader plays row 1 with probability x; the follower's best response
  // (ties broken for the leader) fixes the utility/payment pair.
  const auto g = example_game(0.5);
  CsvTable t({"x", "follower", "payment", "utility"});
  t.comment("bsepace reproduce fig-feasible seed=none");
  for (int i = 0; i <= 200; ++i) {
    const double x = i / 200.0;
    const std::vector<double> mix{x, 1.0 - x};
    std::size_t best = 0;
    double best_u = -1e300, best_lead = -1e300;
    for (std::size_t b = 0; b < g.cols(); ++b) {
      const double uf = bilinear(g.U_L, mix, b), ul = bilinear(g.U_O, mix, b);
      if (uf > best_u + 1e-12 || (std::abs(uf - best_u) <= 1e-12 && ul > best_lead)) {
        best = b;
        best_u = uf;
        best_lead = ul;
      }
    }
    t.row({x, static_cast<std::int64_t>(best), bilinear(g.P[0], mix, best), bilinear(g.U_O, mix, best)});
  }
  const auto f = fs::path(r.out) / "fig-feasible.csv";
  t.write(f);
  CsvTable h({"follower", "payment", "utility"});
  h.comment("bsepace reproduce fig-feasible best-response region vertices");
  for (std::size_t b = 0; b < g.cols(); ++b) {
    for (const auto& x : bsepace::detail::br_vertices(g, b)) {
      h.row({static_cast<std::int64_t>(b), bilinear(g.P[0], x, b), bilinear(g.U_O, x, b)});
    }
  }
  const auto f2 = fs::path(r.out) / "fig-feasible-hull.csv";
  h.write(f2);
  return {f.string(), f2.string()};
}

std::vector<std::string> repro_fig_bse_sppe(const ReproduceOptions& r) {
  AuctionBseProblem p{ValueDistribution::independent_uniform(), AuctionFormat::SecondPrice, 1.0, 1.0, {}, {}, {}};
  const AuctionEngine eng(p);
  const auto b = auction_bse(eng);
  const AuctionPhase* main = nullptr;
  double best_q = -1.0;
  for (const auto& [q, ph] : b.phases) {
    if (!ph.null_phase && q > best_q) {
      best_q = q;
      main = &ph;
    }
  }
  const double sppe_lambda = mirror_pacing_lambda(p);
  const auto mirror = expected_triple(p.fmt, BidPolicy::mirror(), p.dist);
  CsvTable t({"v_O", "sppe_fake_value", "bse_fake_value"});
  t.comment("bsepace reproduce fig-BSE-SPPE seed=none sppe_lambda=" + format_cell(sppe_lambda) + " sppe_value=" +
            format_cell(mirror.U) + " bse_value=" + format_cell(b.value) +
            (main ? " bse_lambda=" + format_cell(main->lambda) : ""));
  for (int i = 0; i <= 100; ++i) {
    const double v = i / 100.0;
    double fake = 0.0;
    if (main) {
      for (const auto& [w, pol] : main->mixture) fake += w * pol(v);
    }
    t.row({v, v, fake});
  }
  const auto f = fs::path(r.out) / "fig-BSE-SPPE.csv";
  t.write(f);
  return {f.string()};
}

std::vector<std::string> dual_figure(const AuctionEngine& eng, const std::string& stem, const ReproduceOptions& r,
                                     double sigma, const std::vector<double>& lambdas,
                                     const std::vector<double>& gs) {
  const auto d = dual_opt(eng);
  CurveOptions co;
  co.diag_lambda_max = lambdas.back();
  const auto c = dual_curve_unchecked(eng, d.mu, d.r_star, sigma, co);
  Scenario meta;
  meta.name = stem;
  meta.sim.seed = r.seed;
  const auto f1 = fs::path(r.out) / (stem + "-curve.csv");
  write_curve(c, meta, f1);
  CsvTable t({"lambda", "g", "f_minus_R"});
  t.comment("bsepace reproduce " + stem + " mu=" + format_cell(c.mu) + " R_star=" + format_cell(c.R_star));
  for (double l : lambdas) {
    for (double g : gs) t.row({l, g, dual_f(eng, c.mu, l, g) - c.R_star});
  }
  const auto f2 = fs::path(r.out) / (stem + "-f.csv");
  t.write(f2);
  return {f1.string(), f2.string()};
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
  return v;
}

std::vector<std::string> repro_fig_dual_warmup(const ReproduceOptions& r) {
  AuctionBseProblem p{ValueDistribution::independent_uniform(), AuctionFormat::SecondPrice, 1.0, 1.0, {}, {}, {}};
  return dual_figure(AuctionEngine(p), "fig-dual-warmup", r, std::sqrt(1e-3), linspace(0.0, 8.0, 81),
                     linspace(-0.5, 0.0, 51));
}

std::vector<std::string> repro_fig_appe_dual(const ReproduceOptions& r) {
  const double delta = 0.05;
  AuctionBseProblem p{ValueDistribution::delta_cdf_example(delta), AuctionFormat::SecondPrice, 0.5,
                      delta / (8.0 * (1.0 + delta)), {}, {}, {}};
  const AuctionEngine eng(p);
  auto files = dual_figure(eng, "fig-appE-dual", r, 0.05, linspace(0.0, 10.0, 51), linspace(-2.0, 0.0, 41));
  // g* at large λ, log-spaced.
  const auto d = dual_opt(eng);
  CsvTable t({"lambda", "g_star"});
  t.comment("bsepace reproduce fig-appE-dual delta=0.05 mu=" + format_cell(d.mu));
  for (int k = 0; k <= 48; ++k) {
    const double l = std::pow(10.0, -1.0 + 5.0 * k / 48.0);
    t.row({l, g_star(eng, d.mu, l, d.r_star).g});
  }
  const auto f = fs::path(r.out) / "fig-appE-dual-large.csv";
  t.write(f);
  files.push_back(f.string());
  return files;
}

std::vector<std::string> repro_appd_details(const ReproduceOptions& r) {
  const auto dist = ValueDistribution::discrete_joint({{0.5, 1.0, 1.0 / 3.0}, {1.0, 1.0, 2.0 / 3.0}});
  CsvTable t({"fake_value", "U", "P_O", "P_L"});
  t.comment("bsepace reproduce appD-details seed=none");
  for (int i = 0; i <= 200; ++i) {
    const double h = i / 100.0;
    const auto tr = expected_triple(AuctionFormat::SecondPrice, BidPolicy::constant(h), dist);
    t.row({h, tr.U, tr.P_O, tr.P_L});
  }
  const auto f1 = fs::path(r.out) / "appD-functions.csv";
  t.write(f1);
  CsvTable v({"rho", "single_phase", "bse", "single_lambda"});
  v.comment("bsepace reproduce appD-details seed=none");
  for (int i = 1; i <= 100; ++i) {
    const double rho = i / 100.0;
    AuctionBseProblem p{dist, AuctionFormat::SecondPrice, 1.0, rho, {}, {}, {}};
    const AuctionEngine eng(p);
    const auto sp = single_phase_value(eng, rho);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    v.row({rho, sp ? sp->value() : nan, auction_bse(eng).value, sp ? sp->lambda : nan});
  }
  const auto f2 = fs::path(r.out) / "appD-values.csv";
  v.write(f2);
  return {f1.string(), f2.string()};
}

std::vector<std::string> repro_exp_appe(const ReproduceOptions& r) {
  CsvTable t({"delta", "T", "eta", "tau", "strategy", "mean_value_per_round", "stderr", "seeds"});
  t.comment("bsepace reproduce exp-appE seed=" + std::to_string(r.seed) + " seeds=" + std::to_string(r.seeds));
  for (double delta : r.deltas) {
    for (double Td : r.Ts) {
      SimConfig c;
      c.dist = ValueDistribution::delta_cdf_example(delta);
      c.T = static_cast<std::int64_t>(std::llround(Td));
      c.eta = resolve_eta("T^{-2/3}", c.T);
      c.eta_rule = "T^{-2/3}";
      c.rho_L = 0.5;
      c.rho_O = delta / (8.0 * (1.0 + delta));
      c.seed = r.seed;
      const double mu = dual_opt(AuctionBseProblem{c.dist, c.fmt, c.rho_L, c.rho_O, {}, {}, {}}).mu;
      const auto tau = switch_time_tau(delta, c.eta, c.T);
      const OptimizerStrategy strategies[2] = {
          OptimizerStrategy::budget_guard(OptimizerStrategy::static_policy(BidPolicy::constant(1.0))),
          OptimizerStrategy::appendix_e(delta, mu, tau)};
      for (int k = 0; k < 2; ++k) {
        c.strategy = strategies[k];
        const auto sum = replicate(c, static_cast<std::size_t>(r.seeds));
        t.row({delta, c.T, c.eta, tau, static_cast<std::int64_t>(k + 1), sum.optimizer_value_per_round.mean,
               sum.optimizer_value_per_round.stderr_, r.seeds});
        std::printf("delta %.3g T %lld strategy %d: %.6f per round\n", delta, static_cast<long long>(c.T), k + 1,
                    sum.optimizer_value_per_round.mean);
      }
    }
  }
  const auto f = fs::path(r.out) / "exp-appE.csv";
  t.write(f);
  return {f.string()};
}

using ReproFn = std::vector<std::string> (*)(const ReproduceOptions&);

const std::vector<std::pair<std::string, ReproFn>>& reproductions() {
  static const std::vector<std::pair<std::string, ReproFn>> table{
      {"fig-SE-BSE", repro_fig_se_bse},     {"fig-feasible", repro_fig_feasible},
      {"fig-BSE-SPPE", repro_fig_bse_sppe}, {"fig-dual-warmup", repro_fig_dual_warmup},
      {"appD-details", repro_appd_details}, {"fig-appE-dual", repro_fig_appe_dual},
      {"exp-appE", repro_exp_appe}};
  return table;
}

int cmd_reproduce(const std::string& id, const ReproduceOptions& r) {
  for (const auto& [name, fn] : reproductions()) {
    if (name == id) {
      for (const auto& f : fn(r)) std::printf("wrote %s\n", f.c_str());
      return kExitOk;
    }
  }
  std::string ids;
  for (const auto& [name, fn] : reproductions()) ids += "  " + name + "\n";
  std::fprintf(stderr, "unknown reproduction id '%s'; valid ids:\n%s", id.c_str(), ids.c_str());
  return kExitUsage;
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Infeasible:
    case ErrorKind::EmptyFrontier: return kExitInfeasible;
    case ErrorKind::QuadratureNonConvergence:
    case ErrorKind::PaymentExceedsBid: return 1;
    default: return kExitUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-pacing auctions: simulation, Stackelberg solver and dual certificates"};
  app.require_subcommand(1);

  Overrides sim_o, solve_o, dual_o;
  std::string strategy;
  std::int64_t reps = 0;
  bool trajectory = false;
  auto* sim = app.add_subcommand("simulate", "run the repeated auction");
  add_common(sim, sim_o);
  sim->add_option("--strategy", strategy, "strategy name from the scenario");
  sim->add_option("--reps", reps, "number of seeded replications");
  sim->add_flag("--trajectory", trajectory, "also write the multiplier trajectory");

  auto* solve = app.add_subcommand("solve", "budgeted Stackelberg equilibrium");
  add_common(solve, solve_o);

  std::optional<double> sigma, dual_eta;
  std::optional<std::int64_t> tau_max;
  bool no_certify = false;
  auto* dual = app.add_subcommand("dual", "dual curve, potential and value-iteration certificate");
  add_common(dual, dual_o);
  dual->add_option("--sigma", sigma, "smoothing window (default sqrt(eta))");
  dual->add_option("--dual-eta", dual_eta, "learning rate used by the certificate");
  dual->add_option("--tau-max", tau_max, "value-iteration horizon");
  dual->add_flag("--no-certify", no_certify, "skip value iteration");

  std::string id;
  ReproduceOptions ro;
  std::string Ts, deltas;
  auto* rep = app.add_subcommand("reproduce", "regenerate a named figure or table");
  rep->add_option("id", id, "reproduction id")->required();
  rep->add_option("--out,-o", ro.out, "output directory");
  rep->add_option("--Ts", Ts, "comma-separated horizons (exp-appE)");
  rep->add_option("--deltas", deltas, "comma-separated deltas (exp-appE)");
  rep->add_option("--seeds", ro.seeds, "replications per point (exp-appE)");
  rep->add_option("--seed", ro.seed, "base seed (exp-appE)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim) return cmd_simulate(sim_o, strategy, reps, trajectory);
    if (*solve) return cmd_solve(solve_o);
    if (*dual) return cmd_dual(dual_o, sigma, dual_eta, tau_max, !no_certify);
    if (*rep) {
      auto list = [](const std::string& s, std::vector<double>& out) {
        if (s.empty()) return;
        out.clear();
        std::stringstream ss(s);
        for (std::string item; std::getline(ss, item, ',');) {
          out.push_back(bsepace::detail::parse_number(item, "list"));
        }
      };
      list(Ts, ro.Ts);
      list(deltas, ro.deltas);
      if (ro.seeds < 1) throw Error(ErrorKind::ConfigError, "--seeds must be >= 1");
      return cmd_reproduce(id, ro);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
