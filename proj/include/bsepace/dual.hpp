#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bsepace/bse.hpp"
#include "bsepace/detail/numeric.hpp"
#include "bsepace/errors.hpp"
#include "bsepace/model.hpp"

namespace bsepace {

/// f(λ, g) = sup over actions of U − μλP_O + g(ρ_L − λP_L).
inline double dual_f(const AuctionEngine& eng, double mu, double lambda, double g) {
  return eng.kernel(1.0, -mu * lambda, -g * lambda).obj + g * eng.problem().rho_L;
}

struct GStarOptions {
  double g_max = 0.0;       // 0: 1e6 · E[v_O] / ρ_L
  double tol_R = 1e-9;      // slack in the level-set test f ≤ R*
  double rel_tol = 1e-10;   // bisection tolerance relative to max(1, |g*(0)|)
};

struct GStar {
  double g = 0.0;                 // -inf when no g ≤ 0 reaches the level
  double f_min = detail::kInf;    // smallest f seen when infeasible
};

/// Largest g ≤ 0 with f(λ, g) ≤ R* (+tol), or -inf.
inline GStar g_star(const AuctionEngine& eng, double mu, double lambda, double R_star,
                    const GStarOptions& o = {}) {
  const auto& p = eng.problem();
  const double level = R_star + o.tol_R;
  auto f = [&](double g) { return dual_f(eng, mu, lambda, g); };
  double f0 = f(0.0);
  if (f0 <= level) return {0.0, f0};
  const double g_max = o.g_max > 0.0 ? o.g_max : 1e6 * std::max(p.dist.mean_optimizer(), 1e-12) / p.rho_L;
  const double scale = std::max(1.0, (p.dist.mean_optimizer() - R_star) / p.rho_L);
  const double xtol = o.rel_tol * scale;
  // f is convex in g: walk down until the level is reached or f turns up.
  double prev = 0.0, fprev = f0, fmin = f0;
  std::optional<double> feasible;
  for (double g = -1.0; g >= -g_max; g *= 2.0) {
    const double fg = f(g);
    fmin = std::min(fmin, fg);
    if (fg <= level) {
      feasible = g;
      break;
    }
    if (fg > fprev) {
      const auto r = detail::golden_minimize(f, g, 0.0, 1e-13 * std::abs(g), 300);
      fmin = std::min(fmin, r.fx);
      if (r.fx <= level) {
        feasible = r.x;
        prev = 0.0;
      }
      break;
    }
    prev = g;
    fprev = fg;
  }
  if (!feasible) return {-detail::kInf, fmin};
  // f(lo) ≤ level < f(hi) on a segment where f is monotone.
  double lo = *feasible, hi = prev;
  if (f(hi) <= level) return {hi, fmin};
  while (hi - lo > xtol) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) <= level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {lo, fmin};
}

struct DualCurve {
  std::vector<double> lambda;
  std::vector<double> g_star;
  std::vector<double> g_star_sigma;
  std::vector<double> G_sigma;
  double sigma = 0.0;
  double step = 0.0;
  double mu = 0.0;
  double R_star = 0.0;
  double R_star_dual = 0.0;   // value handed in from dual_opt, before any bump
  double g0 = 0.0;            // g*(0)
  std::optional<double> lambda_bar;
  bool lambda_bar_scan_found = false;
  double lambda_bar_bound = detail::kInf;  // 1/(μ·ε_sep) when separated
  bool bounded = false;       // g* reached 0 on the grid, potential finite
};

struct CurveOptions {
  GStarOptions g;
  double diag_lambda_max = 100.0;   // grid end when no λ̄ exists
  std::size_t max_nodes = 200000;
  double lambda_bar_search_max = 1e6;
};

/// Grid step: σ divided evenly so σ is an exact multiple of the step and the
/// step is at most min(σ/8, 0.01).
inline double curve_step(double sigma) {
  const double k = std::max(8.0, std::ceil(sigma / 0.01));
  return sigma / k;
}

namespace detail {

/// Smallest λ with f(λ, 0) ≤ level, searched upward then bisected; f(·, 0)
/// is non-increasing in λ.
inline std::optional<double> find_lambda_bar(const AuctionEngine& eng, double mu, double level, double hint,
                                             double search_max) {
  auto ok = [&](double l) { return dual_f(eng, mu, l, 0.0) <= level; };
  if (ok(0.0)) return 0.0;
  double lo = 0.0;
  double hi = std::isfinite(hint) && hint > 0.0 ? std::min(hint, search_max) : 1.0;
  if (ok(hi)) {
    // hint is an upper bound; shrink towards the first point.
  } else {
    lo = hi;
    while (!ok(hi)) {
      lo = hi;
      hi *= 2.0;
      if (hi > search_max) return std::nullopt;
    }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ok(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace detail

struct Smoothed {
  std::vector<double> g_sigma;
  std::vector<double> G_sigma;
};

/// Window average g*_σ(λ) = (1/σ)∫_λ^{λ+σ} g*(x)dx of the piecewise-linear
/// interpolant (zero past the grid), and G_σ(λ) = −∫_λ^∞ g*_σ by trapezoid.
/// The grid must be uniform with σ a multiple of its step.
inline Smoothed smooth_and_integrate(const std::vector<double>& lambda, const std::vector<double>& g, double sigma) {
  const std::size_t n = lambda.size();
  if (n < 2 || g.size() != n) throw Error(ErrorKind::InvalidArgument, "curve needs at least two nodes");
  for (double v : g) {
    if (!std::isfinite(v)) throw Error(ErrorKind::UnboundedPotential, "g* is -inf on the grid");
  }
  if (g.back() != 0.0) throw Error(ErrorKind::UnboundedPotential, "g* does not reach 0 on the grid");
  const double step = lambda[1] - lambda[0];
  const auto k = static_cast<std::size_t>(std::llround(sigma / step));
  if (k == 0 || std::abs(double(k) * step - sigma) > 1e-9 * sigma) {
    throw Error(ErrorKind::InvalidArgument, "sigma must be a multiple of the grid step");
  }
  std::vector<double> cum(n + k, 0.0);
  for (std::size_t i = 1; i < n; ++i) cum[i] = cum[i - 1] + 0.5 * step * (g[i - 1] + g[i]);
  for (std::size_t i = n; i < n + k; ++i) cum[i] = cum[n - 1];
  Smoothed out;
  out.g_sigma.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.g_sigma[i] = (cum[i + k] - cum[i]) / sigma;
  out.G_sigma.assign(n, 0.0);
  for (std::size_t i = n - 1; i-- > 0;) {
    out.G_sigma[i] = out.G_sigma[i + 1] - 0.5 * step * (out.g_sigma[i] + out.g_sigma[i + 1]);
  }
  return out;
}

/// g*, g*_σ and G_σ on a uniform grid over [0, λ̄ + 2σ]. R* is raised to the
/// largest min_g f(λ, g) on the grid when that exceeds the value handed in by
/// a hair, so the level set is never empty through round-off. Throws
/// UnboundedPotential when λ̄ does not exist; `diagnose_dual_curve` returns the
/// curve anyway.
inline DualCurve dual_curve_unchecked(const AuctionEngine& eng, double mu, double R_star, double sigma,
                                      const CurveOptions& o = {}) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  const auto& p = eng.problem();
  DualCurve c;
  c.sigma = sigma;
  c.mu = mu;
  c.R_star_dual = R_star;
  c.R_star = std::max(R_star, p.dist.null_value());
  c.step = curve_step(sigma);
  const double eps = p.dist.epsilon_sep();
  if (eps > 0.0 && mu > 0.0) c.lambda_bar_bound = 1.0 / (mu * eps);

  c.lambda_bar = detail::find_lambda_bar(eng, mu, c.R_star + o.g.tol_R, c.lambda_bar_bound, o.lambda_bar_search_max);
  c.lambda_bar_scan_found = c.lambda_bar.has_value() && !(eps > 0.0);
  double end = c.lambda_bar ? *c.lambda_bar + 2.0 * sigma : o.diag_lambda_max;
  std::size_t nodes = static_cast<std::size_t>(std::ceil(end / c.step)) + 1;
  if (nodes > o.max_nodes) {
    if (c.lambda_bar) throw Error(ErrorKind::InvalidArgument, "curve grid too fine for the λ̄ found");
    nodes = o.max_nodes;
    const double k = std::ceil(sigma / (end / double(nodes - 1)));
    c.step = sigma / std::max(1.0, k);
    nodes = static_cast<std::size_t>(std::ceil(end / c.step)) + 1;
  }
  c.lambda.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) c.lambda[i] = double(i) * c.step;

  for (int pass = 0; pass < 3; ++pass) {
    c.g_star.assign(nodes, 0.0);
    double bump = c.R_star;
    for (std::size_t i = 0; i < nodes; ++i) {
      const auto r = g_star(eng, mu, c.lambda[i], c.R_star, o.g);
      c.g_star[i] = r.g;
      if (!std::isfinite(r.g) && r.f_min - c.R_star < 1e-6 * (1.0 + std::abs(c.R_star))) {
        bump = std::max(bump, r.f_min);
      }
    }
    if (bump <= c.R_star) break;
    c.R_star = bump;
  }
  c.g0 = c.g_star.front();
  c.bounded = c.lambda_bar.has_value() && std::all_of(c.g_star.begin(), c.g_star.end(), [](double v) {
                return std::isfinite(v);
              }) && c.g_star.back() == 0.0;
  if (c.bounded) {
    auto s = smooth_and_integrate(c.lambda, c.g_star, sigma);
    c.g_star_sigma = std::move(s.g_sigma);
    c.G_sigma = std::move(s.G_sigma);
  }
  return c;
}

inline DualCurve dual_curve(const AuctionEngine& eng, double mu, double R_star, double sigma,
                            const CurveOptions& o = {}) {
  auto c = dual_curve_unchecked(eng, mu, R_star, sigma, o);
  if (!c.bounded) throw Error(ErrorKind::UnboundedPotential, "g* never reaches 0: the potential is unbounded");
  return c;
}

/// Linear interpolation on a uniform curve grid, clamped at both ends.
inline double curve_at(const std::vector<double>& lambda, const std::vector<double>& y, double x) {
  if (x <= lambda.front()) return y.front();
  if (x >= lambda.back()) return y.back();
  const double step = lambda[1] - lambda[0];
  const auto i = std::min(static_cast<std::size_t>((x - lambda[0]) / step), lambda.size() - 2);
  const double t = (x - lambda[i]) / step;
  return (1.0 - t) * y[i] + t * y[i + 1];
}

/// A = R* + μσ − η·((ρ_L² + ((λ̄ − ηρ_L)/(1−η))²)/σ)·g*(0), with λ̄ taken at
/// least ρ_L.
inline double separation_constant(const DualCurve& c, double eta, double rho_L) {
  if (!c.lambda_bar) throw Error(ErrorKind::MissingSeparation, "separation constant needs a finite λ̄");
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorKind::InvalidArgument, "eta must lie in (0, 1)");
  const double lb = std::max(*c.lambda_bar, rho_L);
  const double drift = (lb - eta * rho_L) / (1.0 - eta);
  return c.R_star + c.mu * c.sigma - eta * ((rho_L * rho_L + drift * drift) / c.sigma) * c.g0;
}

// ---------------------------------------------------------------------------
// Brute-force value iteration

struct DpTable {
  std::vector<double> lambda;     // uniform grid, possibly extended
  std::size_t checked_nodes = 0;  // nodes of the requested range
  std::vector<std::vector<double>> R;  // R[τ][i], τ = 0..τ_max
  double step = 0.0;
  bool extended = false;
  bool grid_escape = false;       // a requested cell read past the grid end
  std::vector<double> lipschitz;  // per τ, max finite-difference slope
};

struct DpOptions {
  std::vector<double> actions;  // empty: per-slice candidate fake values
};

/// R_τ(λ) = max over fake values (chosen per optimizer value) of
/// E[stage Lagrangian + R_{τ−1}(λ')] with λ' = λ + η(ρ_L − learner payment).
/// Linear interpolation between nodes. The grid is extended once by the
/// largest possible drift ηρ_L·τ_max, so requested cells never read past it.
inline DpTable dp_oracle(const AuctionEngine& eng, double mu, double eta, std::vector<double> lambda_grid,
                         std::size_t tau_max, const DpOptions& o = {}) {
  const auto& p = eng.problem();
  const auto& d = p.dist;
  if (!d.optimizer_discrete() || !d.learner_discrete()) {
    throw Error(ErrorKind::InvalidArgument, "value iteration needs a discrete distribution");
  }
  if (lambda_grid.size() < 2) throw Error(ErrorKind::InvalidArgument, "value iteration needs a grid");
  DpTable t;
  t.step = lambda_grid[1] - lambda_grid[0];
  t.checked_nodes = lambda_grid.size();
  const double need = lambda_grid.back() + eta * p.rho_L * double(tau_max) + t.step;
  if (need > lambda_grid.back()) {
    t.extended = true;
    while (lambda_grid.back() < need) lambda_grid.push_back(lambda_grid.back() + t.step);
  }
  t.lambda = lambda_grid;
  const std::size_t n = t.lambda.size();
  const double l0 = t.lambda.front(), lmax = t.lambda.back();

  struct Outcome {
    double prob, u, pay_O, pay_L;  // payments as λ-free factors
  };
  struct Action {
    std::vector<Outcome> out;
  };
  struct SliceActs {
    double prob;
    std::vector<Action> acts;
  };
  std::vector<SliceActs> slices;
  for (const auto& s : d.slices()) {
    SliceActs sa{s.prob, {}};
    auto hs = o.actions.empty() ? fake_value_candidates(p.fmt, s.learner, p.opts) : o.actions;
    for (double h : hs) {
      Action a;
      for (std::size_t j = 0; j < s.learner.atoms().size(); ++j) {
        const double vl = s.learner.atoms()[j];
        const auto r = resolve_round(p.fmt, h, 1.0, vl, s.v_O);
        a.out.push_back({s.learner.atom_probs()[j], r.u_O, r.p_O_scaled, r.p_L_scaled});
      }
      sa.acts.push_back(std::move(a));
    }
    slices.push_back(std::move(sa));
  }

  t.R.assign(tau_max + 1, std::vector<double>(n, 0.0));
  t.lipschitz.assign(tau_max + 1, 0.0);
  for (std::size_t tau = 1; tau <= tau_max; ++tau) {
    const auto& prev = t.R[tau - 1];
    auto& cur = t.R[tau];
    auto interp = [&](double x, std::size_t node) {
      if (x >= lmax) {
        if (node < t.checked_nodes) t.grid_escape = true;
        return prev.back();
      }
      if (x <= l0) return prev.front();
      const auto i = std::min(static_cast<std::size_t>((x - l0) / t.step), n - 2);
      const double w = (x - t.lambda[i]) / t.step;
      return (1.0 - w) * prev[i] + w * prev[i + 1];
    };
    for (std::size_t i = 0; i < n; ++i) {
      const double lam = t.lambda[i];
      double total = 0.0;
      for (const auto& sa : slices) {
        double best = -detail::kInf;
        for (const auto& a : sa.acts) {
          double v = 0.0;
          for (const auto& oc : a.out) {
            const double next = lam + eta * (p.rho_L - lam * oc.pay_L);
            v += oc.prob * (oc.u - mu * lam * oc.pay_O + interp(next, i));
          }
          best = std::max(best, v);
        }
        total += sa.prob * best;
      }
      cur[i] = total;
    }
    double lip = 0.0;
    for (std::size_t i = 0; i + 1 < t.checked_nodes; ++i) lip = std::max(lip, std::abs(cur[i + 1] - cur[i]) / t.step);
    t.lipschitz[tau] = lip;
  }
  return t;
}

struct Certification {
  bool pass = false;          // with the interpolation slack
  bool strict_pass = false;   // without it
  double A = 0.0;
  double interp_tol = 0.0;
  double worst_margin = detail::kInf;  // min over cells of bound − R (with slack)
  double worst_strict = detail::kInf;
  std::size_t worst_tau = 0;
  double worst_lambda = 0.0;
  std::size_t cells = 0;
};

/// Checks R_τ(λ) ≤ Aτ + G_σ(λ)/η + interp_tol·τ on every requested cell, τ ≥ 1.
inline Certification certify_separation(const DualCurve& c, const DpTable& t, double eta, double rho_L) {
  Certification out;
  out.A = separation_constant(c, eta, rho_L);
  for (std::size_t tau = 1; tau < t.lipschitz.size(); ++tau) {
    out.interp_tol = std::max(out.interp_tol, t.lipschitz[tau] * t.step);
  }
  // τ = 0 holds trivially (R_0 = 0 ≤ G/η).
  for (std::size_t tau = 1; tau < t.R.size(); ++tau) {
    for (std::size_t i = 0; i < t.checked_nodes; ++i) {
      const double lam = t.lambda[i];
      const double G = lam >= c.lambda.back() ? 0.0 : curve_at(c.lambda, c.G_sigma, lam);
      const double bound = out.A * double(tau) + G / eta;
      const double strict = bound - t.R[tau][i];
      const double margin = strict + out.interp_tol * double(tau);
      ++out.cells;
      out.worst_strict = std::min(out.worst_strict, strict);
      if (margin < out.worst_margin) {
        out.worst_margin = margin;
        out.worst_tau = tau;
        out.worst_lambda = lam;
      }
    }
  }
  out.pass = out.worst_margin >= -1e-9;
  out.strict_pass = out.worst_strict >= -1e-9;
  return out;
}

}  // namespace bsepace
