#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "bsepace/detail/numeric.hpp"
#include "bsepace/detail/quadrature.hpp"
#include "bsepace/detail/simplex.hpp"
#include "bsepace/errors.hpp"
#include "bsepace/model.hpp"
#include "bsepace/strategies.hpp"

namespace bsepace {

// ===========================================================================
// Finite games

using Matrix = std::vector<std::vector<double>>;

/// Leader (optimizer) picks rows, follower (learner) picks columns. P[k](a,b)
/// is the leader's k-th payment, budgeted by rho[k].
struct FiniteGame {
  Matrix U_O;
  Matrix U_L;
  std::vector<Matrix> P;
  std::vector<double> rho;

  std::size_t rows() const { return U_O.size(); }
  std::size_t cols() const { return U_O.empty() ? 0 : U_O[0].size(); }

  void validate() const {
    const std::size_t n = rows(), m = cols();
    if (n == 0 || m == 0) throw Error(ErrorKind::InvalidArgument, "empty game");
    auto same = [&](const Matrix& M) {
      if (M.size() != n) return false;
      for (const auto& r : M) {
        if (r.size() != m) return false;
        for (double v : r) {
          if (!std::isfinite(v)) return false;
        }
      }
      return true;
    };
    if (!same(U_O) || !same(U_L)) throw Error(ErrorKind::InvalidArgument, "payoff matrices must share a shape");
    if (P.size() != rho.size()) throw Error(ErrorKind::InvalidArgument, "one budget per payment matrix");
    for (const auto& M : P) {
      if (!same(M)) throw Error(ErrorKind::InvalidArgument, "payment matrices must share the payoff shape");
    }
  }
};

inline double bilinear(const Matrix& M, const std::vector<double>& x, std::size_t b) {
  double s = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) s += x[a] * M[a][b];
  return s;
}

/// True when column b is a follower best response to x.
inline bool is_best_response(const FiniteGame& g, const std::vector<double>& x, std::size_t b,
                             double tol = 1e-9) {
  const double ub = bilinear(g.U_L, x, b);
  for (std::size_t c = 0; c < g.cols(); ++c) {
    if (bilinear(g.U_L, x, c) > ub + tol) return false;
  }
  return true;
}

struct SeResult {
  double value = 0.0;
  std::vector<double> x;
  std::size_t b = 0;
  std::vector<double> spend;
};

/// Best single leader mixed strategy that keeps the budget, with the follower
/// best responding (ties resolved in the leader's favour).
inline SeResult se_value(const FiniteGame& g, const std::vector<double>& rho) {
  g.validate();
  if (rho.size() != g.P.size()) throw Error(ErrorKind::InvalidArgument, "budget vector size mismatch");
  const std::size_t n = g.rows(), m = g.cols();
  std::optional<SeResult> best;
  for (std::size_t b = 0; b < m; ++b) {
    lp::LinearProgram prog(n);
    for (std::size_t a = 0; a < n; ++a) prog.objective[a] = g.U_O[a][b];
    for (std::size_t c = 0; c < m; ++c) {
      if (c == b) continue;
      std::vector<double> row(n);
      for (std::size_t a = 0; a < n; ++a) row[a] = g.U_L[a][b] - g.U_L[a][c];
      prog.add(std::move(row), lp::Sense::GreaterEqual, 0.0);
    }
    for (std::size_t k = 0; k < g.P.size(); ++k) {
      std::vector<double> row(n);
      for (std::size_t a = 0; a < n; ++a) row[a] = g.P[k][a][b];
      prog.add(std::move(row), lp::Sense::LessEqual, rho[k]);
    }
    prog.add(std::vector<double>(n, 1.0), lp::Sense::Equal, 1.0);
    const auto sol = lp::solve(prog);
    if (!sol.optimal()) continue;
    if (!best || sol.objective > best->value + 1e-12) {
      SeResult r;
      r.value = sol.objective;
      r.x = sol.x;
      r.b = b;
      for (const auto& Pk : g.P) r.spend.push_back(bilinear(Pk, sol.x, b));
      best = r;
    }
  }
  if (!best) throw Error(ErrorKind::Infeasible, "no leader strategy satisfies the budget");
  return *best;
}

inline SeResult se_value(const FiniteGame& g, double rho) { return se_value(g, std::vector<double>{rho}); }

struct FinitePhase {
  double z = 0.0;
  std::vector<double> x;
  std::size_t b = 0;
  double value = 0.0;
  std::vector<double> spend;
};

struct FiniteBse {
  double value = 0.0;
  std::vector<double> spend;
  std::vector<FinitePhase> phases;
  std::size_t vertices = 0;
};

namespace detail {

/// Vertices of {x in simplex : b is a best response to x}.
inline std::vector<std::vector<double>> br_vertices(const FiniteGame& g, std::size_t b, double tol = 1e-9) {
  const std::size_t n = g.rows(), m = g.cols();
  // Inequalities r·x >= 0: best-response rows, then x_a >= 0.
  std::vector<std::vector<double>> ineq;
  for (std::size_t c = 0; c < m; ++c) {
    if (c == b) continue;
    std::vector<double> r(n);
    for (std::size_t a = 0; a < n; ++a) r[a] = g.U_L[a][b] - g.U_L[a][c];
    ineq.push_back(std::move(r));
  }
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> r(n, 0.0);
    r[a] = 1.0;
    ineq.push_back(std::move(r));
  }
  const std::size_t K = ineq.size();
  const std::size_t pick = n - 1;
  std::vector<std::vector<double>> out;
  std::vector<char> mask(K, 0);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(pick), 1);
  std::size_t combos = 0;
  do {
    if (++combos > 2'000'000) throw Error(ErrorKind::InvalidArgument, "game too large for vertex enumeration");
    Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::Index r = 0;
    for (std::size_t k = 0; k < K; ++k) {
      if (!mask[k]) continue;
      for (std::size_t a = 0; a < n; ++a) A(r, static_cast<Eigen::Index>(a)) = ineq[k][a];
      ++r;
    }
    for (std::size_t a = 0; a < n; ++a) A(r, static_cast<Eigen::Index>(a)) = 1.0;
    rhs(r) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rank() < static_cast<Eigen::Index>(n)) continue;
    const Eigen::VectorXd x = lu.solve(rhs);
    bool ok = true;
    for (std::size_t k = 0; k < K && ok; ++k) {
      double s = 0.0;
      for (std::size_t a = 0; a < n; ++a) s += ineq[k][a] * x(static_cast<Eigen::Index>(a));
      ok = s >= -tol;
    }
    if (!ok) continue;
    std::vector<double> v(n);
    for (std::size_t a = 0; a < n; ++a) v[a] = std::max(0.0, x(static_cast<Eigen::Index>(a)));
    const bool dup = std::any_of(out.begin(), out.end(), [&](const std::vector<double>& w) {
      for (std::size_t a = 0; a < n; ++a) {
        if (std::abs(w[a] - v[a]) > 1e-9) return false;
      }
      return true;
    });
    if (!dup) out.push_back(std::move(v));
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return out;
}

}  // namespace detail

/// Budgeted Stackelberg equilibrium of a finite game: the best distribution
/// over (leader strategy, follower best response) pairs whose expected
/// payments respect every budget. The LP optimum is basic, so at most m+1
/// pairs carry weight.
inline FiniteBse bse_finite(const FiniteGame& g) {
  g.validate();
  const std::size_t m = g.P.size();
  struct Point {
    std::vector<double> x;
    std::size_t b;
    double u;
    std::vector<double> p;
  };
  std::vector<Point> pts;
  for (std::size_t b = 0; b < g.cols(); ++b) {
    for (auto& x : detail::br_vertices(g, b)) {
      Point pt{x, b, bilinear(g.U_O, x, b), {}};
      for (const auto& Pk : g.P) pt.p.push_back(bilinear(Pk, x, b));
      pts.push_back(std::move(pt));
    }
  }
  lp::LinearProgram prog(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) prog.objective[i] = pts[i].u;
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> row(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) row[i] = pts[i].p[k];
    prog.add(std::move(row), lp::Sense::LessEqual, g.rho[k]);
  }
  prog.add(std::vector<double>(pts.size(), 1.0), lp::Sense::Equal, 1.0);
  const auto sol = lp::solve(prog);
  if (!sol.optimal()) throw Error(ErrorKind::Infeasible, "no mixture of best-response pairs meets the budgets");
  FiniteBse out;
  out.vertices = pts.size();
  out.spend.assign(m, 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (sol.x[i] <= 1e-12) continue;
    FinitePhase ph{sol.x[i], pts[i].x, pts[i].b, pts[i].u, pts[i].p};
    out.value += ph.z * ph.value;
    for (std::size_t k = 0; k < m; ++k) out.spend[k] += ph.z * ph.spend[k];
    out.phases.push_back(std::move(ph));
  }
  return out;
}

// ===========================================================================
// Auctions

struct AuctionOptions {
  double cap = BidPolicy::kDefaultCap;
  std::size_t lambda_points = 64;
  double lambda_max = 0.0;  // 0: derived from the candidate actions
  std::size_t spend_points = 12;
  std::size_t refine_peaks = 3;
  double lambda_xtol = 1e-10;
  double first_price_nudge = 1e-9;
  std::size_t power_grid = 240;
};

struct AuctionBseProblem {
  ValueDistribution dist = ValueDistribution::independent_uniform();
  AuctionFormat fmt = AuctionFormat::SecondPrice;
  double rho_L = 1.0;
  double rho_O = 1.0;
  std::vector<BidPolicy> policy_atoms;  // optional explicit action set
  std::vector<double> lambda_grid;      // optional explicit grid
  AuctionOptions opts;
};

/// One phase: the learner sits at λ while the optimizer plays `mixture`.
/// A null phase stands for the limit λ → ∞ with fake value → 0.
struct AuctionPhase {
  double lambda = 0.0;
  Mixture mixture;
  Triple triple;
  bool null_phase = false;

  double value() const { return triple.U; }
  double spend() const { return null_phase ? 0.0 : lambda * triple.P_O; }
  double learner_spend() const { return null_phase ? std::numeric_limits<double>::quiet_NaN() : lambda * triple.P_L; }
};

/// Fake values at which one-round quantities change regime for learner law L.
inline std::vector<double> fake_value_candidates(AuctionFormat fmt, const Marginal& L, const AuctionOptions& o) {
  std::vector<double> c{0.0, o.cap};
  switch (L.kind()) {
    case Marginal::Kind::Discrete:
    case Marginal::Kind::Point: {
      const auto& a = L.atoms();
      for (std::size_t i = 0; i < a.size(); ++i) {
        c.push_back(a[i]);
        c.push_back(0.5 * (a[i] + (i + 1 < a.size() ? a[i + 1] : o.cap)));
        if (fmt == AuctionFormat::FirstPrice) c.push_back(a[i] + o.first_price_nudge);
      }
      break;
    }
    case Marginal::Kind::PowerHalf: {
      const std::size_t n = std::max<std::size_t>(o.power_grid, 8);
      const double lo = std::log(1e-12), hi = std::log(0.5);
      for (std::size_t i = 0; i < n; ++i) c.push_back(std::exp(lo + (hi - lo) * double(i) / double(n - 1)));
      c.push_back(1.0);
      if (fmt == AuctionFormat::FirstPrice) c.push_back(1.0 + o.first_price_nudge);
      break;
    }
    case Marginal::Kind::Uniform: {
      const std::size_t n = std::max<std::size_t>(o.power_grid, 8);
      for (std::size_t i = 0; i <= n; ++i) c.push_back(double(i) / double(n));
      break;
    }
  }
  for (auto& h : c) h = std::clamp(h, 0.0, o.cap);
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

/// Policy taking value hs[i] on slice i, for optimizer values at `vos`.
inline BidPolicy slice_policy(const std::vector<double>& vos, const std::vector<double>& hs, double cap) {
  if (vos.size() == 1) return BidPolicy::constant(hs[0], cap);
  std::vector<double> breaks;
  for (std::size_t i = 0; i + 1 < vos.size(); ++i) breaks.push_back(0.5 * (vos[i] + vos[i + 1]));
  return BidPolicy::piecewise(breaks, hs, cap);
}

struct KernelResult {
  double obj = -detail::kInf;
  Triple triple;
};

/// Shared machinery for every λ-slice problem of one auction instance.
///
/// Three backends: optimizer values with finitely many slices (LP over
/// per-slice fake values), an explicit policy atom list (LP over atoms), and
/// uniform optimizer values (Lagrangian relaxation with pointwise maximization).
class AuctionEngine {
 public:
  enum class Mode { Slices, Atoms, Continuous };

  explicit AuctionEngine(AuctionBseProblem p) : p_(std::move(p)) {
    if (!(p_.rho_L > 0.0)) throw Error(ErrorKind::InvalidArgument, "rho_L must be positive");
    if (!(p_.rho_O >= 0.0)) throw Error(ErrorKind::InvalidArgument, "rho_O must be non-negative");
    const auto& d = p_.dist;
    if (!p_.policy_atoms.empty()) {
      mode_ = Mode::Atoms;
      Group g;
      g.prob = 1.0;
      for (std::size_t i = 0; i < p_.policy_atoms.size(); ++i) {
        g.cols.push_back({expected_triple(p_.fmt, p_.policy_atoms[i], d), double(i)});
      }
      groups_.push_back(std::move(g));
    } else if (d.optimizer_discrete()) {
      mode_ = Mode::Slices;
      for (const auto& s : d.slices()) {
        Group g;
        g.v_O = s.v_O;
        g.prob = s.prob;
        g.learner = s.learner;
        g.hs = fake_value_candidates(p_.fmt, s.learner, p_.opts);
        for (double h : g.hs) g.cols.push_back({s.prob * slice_triple(p_.fmt, h, s.v_O, s.learner), h});
        groups_.push_back(std::move(g));
        vos_.push_back(s.v_O);
      }
    } else {
      mode_ = Mode::Continuous;
      const Marginal& L = d.learner_marginal();
      if (L.kind() != Marginal::Kind::Uniform) {
        for (double h : fake_value_candidates(p_.fmt, L, p_.opts)) {
          lines_.push_back({h, L.below_prob(h), slice_triple(p_.fmt, h, 0.0, L)});
        }
      }
    }
    max_pl_ = kernel(0.0, 0.0, 1.0).triple.P_L;
    if (mode_ != Mode::Continuous) {
      max_pl_ = 0.0;
      min_pl_ = detail::kInf;
      for (const auto& g : groups_) {
        double mx = 0.0;
        for (const auto& c : g.cols) {
          mx = std::max(mx, c.t.P_L);
          if (c.t.P_L > 1e-300) min_pl_ = std::min(min_pl_, c.t.P_L);
        }
        max_pl_ += mx;
      }
    }
  }

  const AuctionBseProblem& problem() const { return p_; }
  Mode mode() const { return mode_; }
  double max_learner_payment() const { return max_pl_; }
  bool feasible_somewhere() const { return max_pl_ > 0.0; }

  double lambda_min() const { return max_pl_ > 0.0 ? p_.rho_L / max_pl_ : detail::kInf; }

  double lambda_max() const {
    if (p_.opts.lambda_max > 0.0) return p_.opts.lambda_max;
    const double lo = lambda_min();
    double hi = 1e3 * lo;
    if (mode_ != Mode::Continuous && std::isfinite(min_pl_)) hi = std::clamp(p_.rho_L / min_pl_, 4.0 * lo, 1e6 * lo);
    return hi;
  }

  std::vector<double> lambda_grid() const {
    if (!p_.lambda_grid.empty()) return p_.lambda_grid;
    const double lo = lambda_min(), hi = lambda_max();
    const std::size_t n = std::max<std::size_t>(p_.opts.lambda_points, 4);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo * std::pow(hi / lo, double(i) / double(n - 1));
    g.front() = lo * (1.0 + 1e-12);
    return g;
  }

  /// sup over actions of E[cU·U + cO·P_O + cL·P_L], taken value by value.
  KernelResult kernel(double cU, double cO, double cL) const { return kernel_impl(cU, cO, cL, nullptr); }

  /// The maximizing action of `kernel` as a policy.
  BidPolicy kernel_policy(double cU, double cO, double cL) const {
    BidPolicy out = BidPolicy::zero(p_.opts.cap);
    kernel_impl(cU, cO, cL, &out);
    return out;
  }

  /// max U − μλP_O subject to λP_L ≥ ρ_L at a fixed λ.
  std::optional<AuctionPhase> lagrangian(double lambda, double mu) const {
    if (lambda * max_pl_ < p_.rho_L * (1.0 - 1e-12)) return std::nullopt;
    if (mode_ != Mode::Continuous) return solve_lp(lambda, mu, std::nullopt);
    return lagrangian_continuous(lambda, mu);
  }

  /// max U subject to λP_L ≥ ρ_L and λP_O ≤ s at a fixed λ.
  std::optional<AuctionPhase> constrained(double lambda, double s) const {
    if (lambda * max_pl_ < p_.rho_L * (1.0 - 1e-12)) return std::nullopt;
    if (mode_ != Mode::Continuous) return solve_lp(lambda, 0.0, s);
    auto p0 = lagrangian_continuous(lambda, 0.0);
    if (!p0) return std::nullopt;
    if (p0->spend() <= s) return p0;
    double mu_lo = 0.0, mu_hi = 1.0;
    std::optional<AuctionPhase> hi_phase;
    for (;;) {
      hi_phase = lagrangian_continuous(lambda, mu_hi);
      if (!hi_phase) return std::nullopt;
      if (hi_phase->spend() <= s) break;
      mu_lo = mu_hi;
      mu_hi *= 2.0;
      if (mu_hi > 1e12) return std::nullopt;
    }
    AuctionPhase lo_phase = *p0;
    if (mu_lo > 0.0) lo_phase = *lagrangian_continuous(lambda, mu_lo);
    for (int it = 0; it < 200 && mu_hi - mu_lo > 1e-13 * mu_hi; ++it) {
      const double mid = 0.5 * (mu_lo + mu_hi);
      auto ph = lagrangian_continuous(lambda, mid);
      if (!ph) return std::nullopt;
      if (ph->spend() <= s) {
        mu_hi = mid;
        hi_phase = ph;
      } else {
        mu_lo = mid;
        lo_phase = *ph;
      }
    }
    return blend(lo_phase, *hi_phase, lo_phase.spend(), hi_phase->spend(), s, lambda);
  }

  AuctionPhase null_phase() const {
    AuctionPhase ph;
    ph.lambda = detail::kInf;
    ph.mixture = {{1.0, BidPolicy::zero(p_.opts.cap)}};
    ph.triple = {p_.dist.null_value(), 0.0, 0.0};
    ph.null_phase = true;
    return ph;
  }

 private:
  struct Column {
    Triple t;  // already weighted by the slice probability
    double h;
  };
  struct Group {
    double v_O = 0.0;
    double prob = 1.0;
    Marginal learner = Marginal::uniform();
    std::vector<double> hs;
    std::vector<Column> cols;
  };
  struct Line {
    double h;
    double W;
    Triple t;  // at v_O = 0; U is added as v·W
  };

  static double score(const Triple& t, double cU, double cO, double cL) {
    return cU * t.U + cO * t.P_O + cL * t.P_L;
  }

  /// Quadratic coefficients (c0, c1, c2) of the per-value objective in h on
  /// [0, 1] against a uniform learner.
  std::array<double, 3> quad_coeffs(double v, double cU, double cO, double cL) const {
    if (p_.fmt == AuctionFormat::SecondPrice) return {0.0, cU * v + cL, 0.5 * cO - cL};
    return {0.5 * cL, cU * v, cO - 0.5 * cL};
  }

  double quad_argmax(double v, double cU, double cO, double cL) const {
    const auto c = quad_coeffs(v, cU, cO, cL);
    if (c[2] < 0.0) return std::clamp(-c[1] / (2.0 * c[2]), 0.0, 1.0);
    return (c[1] + c[2] > 0.0) ? 1.0 : 0.0;
  }

  /// Best fake value for one optimizer value against one learner law.
  std::pair<double, Triple> best_in_slice(const Group& g, double cU, double cO, double cL) const {
    const Marginal& L = g.learner;
    if (L.kind() == Marginal::Kind::Uniform) {
      double h = quad_argmax(g.v_O, cU, cO, cL);
      Triple t = g.prob * slice_triple(p_.fmt, h, g.v_O, L);
      const Triple tc = g.prob * slice_triple(p_.fmt, p_.opts.cap, g.v_O, L);
      if (score(tc, cU, cO, cL) > score(t, cU, cO, cL)) return {p_.opts.cap, tc};
      return {h, t};
    }
    std::size_t best = 0;
    double bs = -detail::kInf;
    for (std::size_t i = 0; i < g.cols.size(); ++i) {
      const double s = score(g.cols[i].t, cU, cO, cL);
      if (s > bs) {
        bs = s;
        best = i;
      }
    }
    double h = g.hs[best];
    Triple t = g.cols[best].t;
    if (L.kind() == Marginal::Kind::PowerHalf && h > 0.0 && h < 0.5) {
      // Continuous part of the law: polish between grid neighbours.
      const double lo = g.hs[best - 1], hi = g.hs[best + 1];
      auto f = [&](double x) { return score(g.prob * slice_triple(p_.fmt, x, g.v_O, L), cU, cO, cL); };
      const auto r = detail::golden_maximize(f, std::max(lo, 1e-300), std::min(hi, 0.5), 1e-14 * hi, 120);
      if (r.fx > bs) {
        h = r.x;
        t = g.prob * slice_triple(p_.fmt, h, g.v_O, L);
      }
    }
    return {h, t};
  }

  KernelResult kernel_impl(double cU, double cO, double cL, BidPolicy* policy) const {
    KernelResult out;
    if (mode_ == Mode::Atoms) {
      std::size_t best = 0;
      for (std::size_t i = 0; i < groups_[0].cols.size(); ++i) {
        const double s = score(groups_[0].cols[i].t, cU, cO, cL);
        if (s > out.obj) {
          out.obj = s;
          out.triple = groups_[0].cols[i].t;
          best = i;
        }
      }
      if (policy) *policy = p_.policy_atoms[best];
      return out;
    }
    if (mode_ == Mode::Slices) {
      std::vector<double> hs;
      out.obj = 0.0;
      for (const auto& g : groups_) {
        auto [h, t] = best_in_slice(g, cU, cO, cL);
        out.triple += t;
        hs.push_back(h);
      }
      out.obj = score(out.triple, cU, cO, cL);
      if (policy) *policy = slice_policy(vos_, hs, p_.opts.cap);
      return out;
    }
    if (lines_.empty()) return uniform_uniform(cU, cO, cL, policy);
    return envelope(cU, cO, cL, policy);
  }

  KernelResult uniform_uniform(double cU, double cO, double cL, BidPolicy* policy) const {
    const Marginal& L = p_.dist.learner_marginal();
    // h*(v) is affine in v until it clips at 0 or 1.
    std::vector<double> breaks;
    const auto c0 = quad_coeffs(0.0, cU, cO, cL), c1 = quad_coeffs(1.0, cU, cO, cL);
    const double slope = c1[1] - c0[1];
    double alpha = 0.0, beta = 0.0;
    bool affine = false;
    if (c0[2] < 0.0 && slope != 0.0) {
      alpha = slope / (-2.0 * c0[2]);
      beta = c0[1] / (-2.0 * c0[2]);
      affine = true;
      breaks.push_back(-beta / alpha);
      breaks.push_back((1.0 - beta) / alpha);
    } else if (slope != 0.0) {
      breaks.push_back(-(c0[1] + c0[2]) / slope);
    }
    const auto r = detail::integrate<3>(
        [&](double v) {
          const Triple t = slice_triple(p_.fmt, quad_argmax(v, cU, cO, cL), v, L);
          return std::array<double, 3>{t.U, t.P_O, t.P_L};
        },
        0.0, 1.0, 1e-13, breaks);
    KernelResult out;
    out.triple = {r.value[0], r.value[1], r.value[2]};
    out.obj = score(out.triple, cU, cO, cL);
    if (policy) {
      if (affine) {
        *policy = BidPolicy::affine(alpha, beta, 0.0, 1.0, p_.opts.cap);
      } else {
        *policy = BidPolicy::constant(quad_argmax(0.5, cU, cO, cL), p_.opts.cap);
      }
    }
    return out;
  }

  /// Upper envelope over v in [0, 1] of the candidate lines v·cU·W + const.
  KernelResult envelope(double cU, double cO, double cL, BidPolicy* policy) const {
    auto slope = [&](const Line& l) { return cU * l.W; };
    auto icpt = [&](const Line& l) { return score(l.t, cU, cO, cL); };
    std::size_t cur = 0;
    for (std::size_t i = 1; i < lines_.size(); ++i) {
      const double a = icpt(lines_[i]), b = icpt(lines_[cur]);
      if (a > b || (a == b && slope(lines_[i]) > slope(lines_[cur]))) cur = i;
    }
    KernelResult out;
    out.triple = {};
    std::vector<double> breaks, hs;
    double v = 0.0;
    while (v < 1.0) {
      double next = 1.0;
      std::size_t nxt = cur;
      for (std::size_t i = 0; i < lines_.size(); ++i) {
        const double ds = slope(lines_[i]) - slope(lines_[cur]);
        if (ds <= 0.0) continue;
        const double x = (icpt(lines_[cur]) - icpt(lines_[i])) / ds;
        if (x > v && (x < next || (x == next && nxt != cur && slope(lines_[i]) > slope(lines_[nxt])))) {
          next = x;
          nxt = i;
        }
      }
      const Line& l = lines_[cur];
      const double w = next - v;
      out.triple += Triple{l.W * 0.5 * (next * next - v * v), l.t.P_O * w, l.t.P_L * w};
      hs.push_back(l.h);
      if (next < 1.0) breaks.push_back(next);
      v = next;
      if (nxt == cur) break;
      cur = nxt;
    }
    out.obj = score(out.triple, cU, cO, cL);
    if (policy) {
      *policy = hs.size() == 1 ? BidPolicy::constant(hs[0], p_.opts.cap)
                               : BidPolicy::piecewise(breaks, hs, p_.opts.cap);
    }
    return out;
  }

  static AuctionPhase blend(const AuctionPhase& a, const AuctionPhase& b, double xa, double xb, double target,
                            double lambda) {
    double wb = (xa == xb) ? 1.0 : (xa - target) / (xa - xb);
    wb = std::clamp(wb, 0.0, 1.0);
    AuctionPhase out;
    out.lambda = lambda;
    out.triple = (1.0 - wb) * a.triple + wb * b.triple;
    auto add = [&](double w, const AuctionPhase& ph) {
      if (w <= 1e-15) return;
      for (const auto& [wi, pol] : ph.mixture) out.mixture.push_back({w * wi, pol});
    };
    add(1.0 - wb, a);
    add(wb, b);
    return out;
  }

  std::optional<AuctionPhase> lagrangian_continuous(double lambda, double mu) const {
    const double target = p_.rho_L / lambda;
    auto at = [&](double b) {
      AuctionPhase ph;
      ph.lambda = lambda;
      BidPolicy pol = BidPolicy::zero(p_.opts.cap);
      ph.triple = kernel_impl(1.0, -mu * lambda, b * lambda, &pol).triple;
      ph.mixture = {{1.0, pol}};
      return ph;
    };
    AuctionPhase lo = at(0.0);
    if (lo.triple.P_L >= target) return lo;
    double b_lo = 0.0, b_hi = 1.0;
    AuctionPhase hi = at(b_hi);
    while (hi.triple.P_L < target) {
      b_lo = b_hi;
      lo = hi;
      b_hi *= 2.0;
      if (b_hi > 1e12) return std::nullopt;
      hi = at(b_hi);
    }
    for (int it = 0; it < 200 && b_hi - b_lo > 1e-13 * b_hi; ++it) {
      const double mid = 0.5 * (b_lo + b_hi);
      AuctionPhase m = at(mid);
      if (m.triple.P_L >= target) {
        b_hi = mid;
        hi = std::move(m);
      } else {
        b_lo = mid;
        lo = std::move(m);
      }
    }
    return blend(hi, lo, hi.triple.P_L, lo.triple.P_L, target, lambda);
  }

  std::optional<AuctionPhase> solve_lp(double lambda, double mu, std::optional<double> spend_cap) const {
    std::size_t n = 0;
    for (const auto& g : groups_) n += g.cols.size();
    lp::LinearProgram prog(n);
    std::vector<double> pl(n), po(n);
    std::size_t k = 0;
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      std::vector<double> row(n, 0.0);
      for (const auto& c : groups_[gi].cols) {
        prog.objective[k] = c.t.U - mu * lambda * c.t.P_O;
        pl[k] = lambda * c.t.P_L;
        po[k] = lambda * c.t.P_O;
        row[k] = 1.0;
        ++k;
      }
      prog.add(std::move(row), lp::Sense::Equal, 1.0);
    }
    prog.add(pl, lp::Sense::GreaterEqual, p_.rho_L);
    if (spend_cap) prog.add(po, lp::Sense::LessEqual, *spend_cap);
    const auto sol = lp::solve(prog);
    if (!sol.optimal()) return std::nullopt;
    AuctionPhase ph;
    ph.lambda = lambda;
    k = 0;
    std::vector<std::vector<std::pair<double, double>>> per_group(groups_.size());
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      for (const auto& c : groups_[gi].cols) {
        const double w = sol.x[k++];
        if (w <= 1e-13) continue;
        ph.triple += w * c.t;
        per_group[gi].push_back({c.h, w});
      }
    }
    if (mode_ == Mode::Atoms) {
      double tot = 0.0;
      for (const auto& [idx, w] : per_group[0]) tot += w;
      for (const auto& [idx, w] : per_group[0]) {
        ph.mixture.push_back({w / tot, p_.policy_atoms[static_cast<std::size_t>(idx)]});
      }
      return ph;
    }
    ph.mixture = couple(per_group);
    return ph;
  }

  /// Joins per-slice fake-value distributions into a mixture of policies by
  /// quantile coupling (sorted by fake value within each slice).
  Mixture couple(std::vector<std::vector<std::pair<double, double>>>& per_group) const {
    std::vector<double> cuts{0.0, 1.0};
    for (auto& pg : per_group) {
      std::sort(pg.begin(), pg.end());
      double tot = 0.0;
      for (const auto& e : pg) tot += e.second;
      for (auto& e : pg) e.second /= tot;
      double c = 0.0;
      for (std::size_t i = 0; i + 1 < pg.size(); ++i) {
        c += pg[i].second;
        cuts.push_back(c);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    Mixture out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double w = cuts[i + 1] - cuts[i];
      if (w <= 1e-13) continue;
      const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
      std::vector<double> hs;
      for (const auto& pg : per_group) {
        double c = 0.0;
        double h = pg.back().first;
        for (const auto& [hv, pw] : pg) {
          c += pw;
          if (mid < c) {
            h = hv;
            break;
          }
        }
        hs.push_back(h);
      }
      out.push_back({w, slice_policy(vos_, hs, p_.opts.cap)});
    }
    return out;
  }

  AuctionBseProblem p_;
  Mode mode_ = Mode::Slices;
  std::vector<Group> groups_;
  std::vector<double> vos_;
  std::vector<Line> lines_;
  double max_pl_ = 0.0;
  double min_pl_ = detail::kInf;
};

// ---------------------------------------------------------------------------
// Searches over λ

struct LambdaSearch {
  double lambda = 0.0;
  double value = -detail::kInf;
};

/// Maximizes phi over λ: grid scan, then golden-section polish around the
/// best few local peaks.
template <class F>
LambdaSearch maximize_over_lambda(const AuctionEngine& eng, const F& phi) {
  const auto grid = eng.lambda_grid();
  std::vector<double> vals(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = phi(grid[i]);
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(vals[i])) continue;
    const bool left = i == 0 || !(vals[i - 1] > vals[i]);
    const bool right = i + 1 == grid.size() || !(vals[i + 1] > vals[i]);
    if (left && right) peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(), [&](auto a, auto b) { return vals[a] > vals[b]; });
  LambdaSearch best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (vals[i] > best.value) best = {grid[i], vals[i]};
  }
  const std::size_t K = std::min(peaks.size(), eng.problem().opts.refine_peaks);
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t i = peaks[k];
    const double lo = i > 0 ? grid[i - 1] : grid[i];
    const double hi = i + 1 < grid.size() ? grid[i + 1] : grid[i];
    if (!(hi > lo)) continue;
    auto neg = [&](double l) {
      const double v = phi(l);
      return std::isfinite(v) ? -v : 1e300;
    };
    const auto r = detail::golden_minimize(neg, lo, hi, eng.problem().opts.lambda_xtol * hi, 200);
    if (-r.fx > best.value) best = {r.x, -r.fx};
  }
  return best;
}

struct LagrangianReward {
  double r_star = -detail::kInf;
  AuctionPhase phase;
};

/// R*(μ): the best Lagrangian reward U − μ·spend over λ and actions, with the
/// learner best responding; the null phase competes too.
inline LagrangianReward lagrangian_reward(const AuctionEngine& eng, double mu) {
  if (!(mu >= 0.0)) throw Error(ErrorKind::InvalidArgument, "mu must be non-negative");
  if (!eng.feasible_somewhere()) throw Error(ErrorKind::EmptyFrontier, "no λ lets the learner meet her budget");
  auto phi = [&](double l) {
    const auto ph = eng.lagrangian(l, mu);
    return ph ? ph->value() - mu * ph->spend() : -detail::kInf;
  };
  const auto best = maximize_over_lambda(eng, phi);
  LagrangianReward out;
  out.phase = eng.null_phase();
  out.r_star = out.phase.value();
  if (std::isfinite(best.value) && best.value > out.r_star) {
    out.r_star = best.value;
    out.phase = *eng.lagrangian(best.lambda, mu);
  }
  return out;
}

inline LagrangianReward lagrangian_reward(const AuctionBseProblem& p, double mu) {
  return lagrangian_reward(AuctionEngine(p), mu);
}

struct DualSolution {
  double opt = 0.0;
  double mu = 0.0;
  double r_star = 0.0;
};

namespace detail {
inline DualSolution dual_min(const AuctionEngine& eng) {
  const auto& p = eng.problem();
  const double mu_max = p.rho_O > 0.0 ? std::max(p.dist.mean_optimizer() / p.rho_O, 1e-9) : 1e6;
  auto D = [&](double mu) { return lagrangian_reward(eng, mu).r_star + mu * p.rho_O; };
  const auto r = golden_minimize(D, 0.0, mu_max, 1e-9 * (1.0 + mu_max), 200);
  return {r.fx, r.x, r.fx - r.x * p.rho_O};
}
}  // namespace detail

/// OPT = min over μ ≥ 0 of R*(μ) + μ·ρ_O.
inline DualSolution dual_opt(const AuctionEngine& eng) {
  const auto& d = eng.problem().dist;
  if (!(d.mean_learner() > 0.0) || !(d.mean_optimizer() > 0.0)) {
    throw Error(ErrorKind::DegenerateDistribution, "both players need positive expected values");
  }
  if (!eng.feasible_somewhere()) throw Error(ErrorKind::EmptyFrontier, "no λ lets the learner meet her budget");
  return detail::dual_min(eng);
}

inline DualSolution dual_opt(const AuctionBseProblem& p) { return dual_opt(AuctionEngine(p)); }

// ---------------------------------------------------------------------------
// Frontier and equilibrium

struct FrontierPoint {
  double spend = 0.0;
  double value = 0.0;
  AuctionPhase phase;
};

/// Single-phase (spend, value) points: for each λ the unconstrained optimum
/// plus spend-capped variants, the null phase, filtered to the Pareto set.
inline std::vector<FrontierPoint> auction_phase_frontier(const AuctionEngine& eng) {
  if (!eng.feasible_somewhere()) throw Error(ErrorKind::EmptyFrontier, "no λ lets the learner meet her budget");
  const auto& p = eng.problem();
  std::vector<FrontierPoint> pts;
  const auto grid = eng.lambda_grid();
  double s_max = 0.0;
  for (double l : grid) {
    if (auto ph = eng.constrained(l, detail::kInf)) {
      s_max = std::max(s_max, ph->spend());
      pts.push_back({ph->spend(), ph->value(), *ph});
    }
  }
  if (pts.empty()) throw Error(ErrorKind::EmptyFrontier, "no λ on the grid is feasible");
  std::vector<double> spends{p.rho_O};
  const std::size_t ns = std::max<std::size_t>(p.opts.spend_points, 2);
  for (std::size_t k = 0; k < ns; ++k) spends.push_back(s_max * double(k) / double(ns - 1));
  for (double l : grid) {
    for (double s : spends) {
      if (auto ph = eng.constrained(l, s)) pts.push_back({ph->spend(), ph->value(), *ph});
    }
  }
  const auto np = eng.null_phase();
  pts.push_back({0.0, np.value(), np});
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.spend < b.spend || (a.spend == b.spend && a.value > b.value);
  });
  std::vector<FrontierPoint> pareto;
  double best = -detail::kInf;
  for (auto& pt : pts) {
    if (pt.value > best + 1e-12) {
      best = pt.value;
      pareto.push_back(std::move(pt));
    }
  }
  return pareto;
}

inline std::vector<FrontierPoint> auction_phase_frontier(const AuctionBseProblem& p) {
  return auction_phase_frontier(AuctionEngine(p));
}

struct HullPick {
  std::size_t lo = 0, hi = 0;  // indices into the point list
  double q = 1.0;              // weight on `lo`
  double value = 0.0;
};

/// Upper concave envelope of Pareto points (sorted by spend) at spend s.
inline HullPick concave_envelope_at(const std::vector<FrontierPoint>& pts, double s) {
  std::vector<std::size_t> hull;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (hull.size() >= 2) {
      const auto& a = pts[hull[hull.size() - 2]];
      const auto& b = pts[hull.back()];
      const auto& c = pts[i];
      const double cross = (b.spend - a.spend) * (c.value - a.value) - (b.value - a.value) * (c.spend - a.spend);
      if (cross >= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(i);
  }
  if (s < pts[hull.front()].spend) throw Error(ErrorKind::Infeasible, "budget below the cheapest phase");
  for (std::size_t k = 0; k + 1 < hull.size(); ++k) {
    const auto& a = pts[hull[k]];
    const auto& b = pts[hull[k + 1]];
    if (s <= b.spend) {
      const double q = (b.spend - s) / (b.spend - a.spend);
      return {hull[k], hull[k + 1], q, q * a.value + (1.0 - q) * b.value};
    }
  }
  return {hull.back(), hull.back(), 1.0, pts[hull.back()].value};
}

struct AuctionBse {
  double value = 0.0;
  double spend = 0.0;
  std::vector<std::pair<double, AuctionPhase>> phases;  // (time weight q_j, phase)
  DualSolution dual;
  double duality_gap = 0.0;
  bool from_frontier = false;
};

/// Budgeted Stackelberg equilibrium of the auction. Phases come from the
/// Lagrangian maximizers just below and above μ*, time-shared to spend
/// exactly ρ_O; the frontier hull is the fallback.
inline AuctionBse auction_bse(const AuctionEngine& eng) {
  if (!eng.feasible_somewhere()) throw Error(ErrorKind::EmptyFrontier, "no λ lets the learner meet her budget");
  const auto& p = eng.problem();
  AuctionBse out;
  out.dual = detail::dual_min(eng);
  const double eps = 1e-6 * (1.0 + out.dual.mu);
  const auto below = lagrangian_reward(eng, std::max(0.0, out.dual.mu - eps)).phase;
  const double tol = 1e-12 * (1.0 + p.rho_O);
  if (below.spend() <= p.rho_O + tol) {
    out.phases = {{1.0, below}};
  } else {
    const auto above = lagrangian_reward(eng, out.dual.mu + eps).phase;
    if (above.spend() <= p.rho_O + tol) {
      const double q = (p.rho_O - above.spend()) / (below.spend() - above.spend());
      out.phases = {{q, below}, {1.0 - q, above}};
    }
  }
  if (out.phases.empty()) {
    const auto pts = auction_phase_frontier(eng);
    const auto pick = concave_envelope_at(pts, p.rho_O);
    out.from_frontier = true;
    out.phases.push_back({pick.q, pts[pick.lo].phase});
    if (pick.hi != pick.lo && pick.q < 1.0) out.phases.push_back({1.0 - pick.q, pts[pick.hi].phase});
  }
  out.phases.erase(std::remove_if(out.phases.begin(), out.phases.end(), [](const auto& e) { return e.first <= 1e-12; }),
                   out.phases.end());
  for (const auto& [q, ph] : out.phases) {
    out.value += q * ph.value();
    out.spend += q * ph.spend();
  }
  out.duality_gap = out.dual.opt - out.value;
  return out;
}

inline AuctionBse auction_bse(const AuctionBseProblem& p) { return auction_bse(AuctionEngine(p)); }

/// Best value a single phase (one λ, one action distribution) reaches with
/// optimizer spend at most s.
inline std::optional<AuctionPhase> single_phase_value(const AuctionEngine& eng, double s) {
  auto phi = [&](double l) {
    const auto ph = eng.constrained(l, s);
    return ph ? ph->value() : -detail::kInf;
  };
  const auto best = maximize_over_lambda(eng, phi);
  std::optional<AuctionPhase> out;
  if (std::isfinite(best.value)) out = eng.constrained(best.lambda, s);
  const auto np = eng.null_phase();
  if (!out || np.value() > out->value()) out = np;
  return out;
}

/// Multiplier at which mirroring the learner (fake value = own value) exhausts
/// the learner's budget exactly: λ·P_L(mirror) = ρ_L.
inline double mirror_pacing_lambda(const AuctionBseProblem& p) {
  const Triple t = expected_triple(p.fmt, BidPolicy::mirror(p.opts.cap), p.dist);
  if (!(t.P_L > 0.0)) throw Error(ErrorKind::Infeasible, "mirror policy leaves the learner no payment");
  return p.rho_L / t.P_L;
}

/// The time-shared BSE phases turned into a schedule (phase j for a q_j share
/// of the horizon).
inline OptimizerStrategy bse_schedule(const AuctionBse& b) {
  std::vector<SchedulePhase> phases;
  for (const auto& [q, ph] : b.phases) {
    if (q <= 0.0) continue;
    phases.push_back({q, ph.null_phase ? Mixture{{1.0, BidPolicy::zero()}} : ph.mixture});
  }
  double total = 0.0;
  for (const auto& ph : phases) total += ph.fraction;
  for (auto& ph : phases) ph.fraction /= total;
  return OptimizerStrategy::phase_schedule(std::move(phases));
}

}  // namespace bsepace
