#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "bsepace/detail/numeric.hpp"
#include "bsepace/errors.hpp"
#include "bsepace/learner.hpp"
#include "bsepace/model.hpp"
#include "bsepace/strategies.hpp"

namespace bsepace {

/// Parses a learning rate: a plain number or a rule "T^{-a/b}" / "T^-x".
inline double resolve_eta(const std::string& text, std::int64_t T) {
  std::string s;
  for (char ch : text) {
    if (ch != ' ' && ch != '{' && ch != '}') s += ch;
  }
  auto parse_num = [&](const std::string& v) {
    const auto slash = v.find('/');
    std::size_t used = 0;
    double out = 0.0;
    try {
      if (slash == std::string::npos) {
        out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
      } else {
        const std::string a = v.substr(0, slash), b = v.substr(slash + 1);
        std::size_t ua = 0, ub = 0;
        const double na = std::stod(a, &ua), nb = std::stod(b, &ub);
        if (ua != a.size() || ub != b.size() || nb == 0.0) throw std::invalid_argument(v);
        out = na / nb;
      }
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "cannot parse eta '" + text + "'");
    }
    return out;
  };
  double eta = 0.0;
  if (s.rfind("T^", 0) == 0) {
    if (T < 1) throw Error(ErrorKind::ConfigError, "eta rule needs a horizon");
    eta = std::pow(static_cast<double>(T), parse_num(s.substr(2)));
  } else {
    eta = parse_num(s);
  }
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorKind::ConfigError, "eta '" + text + "' resolves outside (0, 1)");
  return eta;
}

struct SimConfig {
  ValueDistribution dist = ValueDistribution::independent_uniform();
  AuctionFormat fmt = AuctionFormat::SecondPrice;
  std::int64_t T = 1000;
  double eta = 0.01;
  std::string eta_rule;  // informational once resolved
  double rho_L = 1.0;
  double rho_O = 1.0;
  double lambda_initial = 0.0;
  OptimizerStrategy strategy = OptimizerStrategy::static_policy(BidPolicy::zero());
  std::uint64_t seed = 1;
  bool record_trajectory = false;
  std::int64_t trajectory_stride = 0;  // 0: max(1, T/10^4)

  void validate() const {
    if (T < 1) throw Error(ErrorKind::InvalidArgument, "T must be >= 1");
    if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorKind::InvalidArgument, "eta must lie in (0, 1)");
    if (!(rho_L > 0.0) || !(rho_O >= 0.0)) throw Error(ErrorKind::InvalidArgument, "budgets must be positive");
    if (!(lambda_initial >= 0.0)) throw Error(ErrorKind::InvalidArgument, "initial multiplier must be >= 0");
  }
  bool budget_safe_start() const { return lambda_initial <= rho_L; }
  std::int64_t stride() const {
    return trajectory_stride > 0 ? trajectory_stride : std::max<std::int64_t>(1, T / 10000);
  }
};

struct TrajectoryPoint {
  std::int64_t t;           // rounds completed
  double lambda;            // multiplier entering round t+1
  double optimizer_value;   // cumulative
  double optimizer_spend;   // cumulative
  double learner_spend;     // cumulative
};

struct SimResult {
  double optimizer_total_value = 0.0;
  double optimizer_total_spend = 0.0;
  double learner_total_value = 0.0;
  double learner_total_spend = 0.0;
  double lambda_final = 0.0;
  double lambda_min = 0.0;
  std::int64_t optimizer_wins = 0;
  std::int64_t learner_violation_rounds = 0;    // rounds ending with learner spend above ρ_L·T
  std::int64_t optimizer_violation_rounds = 0;  // rounds ending with optimizer spend above ρ_O·T
  std::int64_t first_learner_violation = 0;     // 0 when none
  std::int64_t first_optimizer_violation = 0;
  std::vector<TrajectoryPoint> trajectory;
  double eta = 0.0;
  std::int64_t T = 0;

  double optimizer_value_per_round() const { return optimizer_total_value / double(T); }
};

inline SimResult run(const SimConfig& c) {
  c.validate();
  LearnerState L = make_learner(c.rho_L, c.eta, c.T, c.lambda_initial);
  detail::CounterRng rng(c.seed);
  detail::KahanSum ov, os, lv;
  SimResult out;
  out.eta = c.eta;
  out.T = c.T;
  out.lambda_min = L.lambda;
  const double opt_budget = c.rho_O * double(c.T);
  const double opt_limit = opt_budget * (1.0 + 1e-12) + 1e-12;
  const double learner_limit = L.budget_total * (1.0 + 1e-12) + 1e-12;
  const std::int64_t stride = c.stride();
  if (c.record_trajectory) out.trajectory.push_back({0, L.lambda, 0.0, 0.0, 0.0});
  for (std::int64_t t = 1; t <= c.T; ++t) {
    const auto idx = static_cast<std::uint64_t>(t - 1);
    const auto [vl, vo] = c.dist.sample(rng.uniform(idx, 0), rng.uniform(idx, 1));
    StrategyContext ctx{t, c.T, L.lambda, vo, opt_budget - os.value(), c.fmt};
    const double h = c.strategy.act(ctx, rng.uniform(idx, 2));
    const auto r = resolve_round(c.fmt, h, L.lambda, vl, vo);
    if (r.winner == Winner::Optimizer) {
      ov += vo;
      os += r.p_O_scaled;
      ++out.optimizer_wins;
    } else {
      lv += vl;
    }
    learner_update(L, r.p_L_scaled);
    out.lambda_min = std::min(out.lambda_min, L.lambda);
    if (L.cumulative_payment() > learner_limit) {
      if (out.learner_violation_rounds++ == 0) out.first_learner_violation = t;
    }
    if (os.value() > opt_limit) {
      if (out.optimizer_violation_rounds++ == 0) out.first_optimizer_violation = t;
    }
    if (c.record_trajectory && (t % stride == 0 || t == c.T)) {
      out.trajectory.push_back({t, L.lambda, ov.value(), os.value(), L.cumulative_payment()});
    }
  }
  out.optimizer_total_value = ov.value();
  out.optimizer_total_spend = os.value();
  out.learner_total_value = lv.value();
  out.learner_total_spend = L.cumulative_payment();
  out.lambda_final = L.lambda;
  return out;
}

/// Worker count: BSEPACE_THREADS if set to a positive integer, else the
/// hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("BSEPACE_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n) on up to `threads` workers; rethrows the
/// first failure.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& body) {
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex m;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(m);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

struct Stat {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline Stat summarize(const std::vector<double>& xs) {
  Stat s;
  const double n = double(xs.size());
  if (xs.empty()) return s;
  detail::KahanSum sum;
  for (double x : xs) sum += x;
  s.mean = sum.value() / n;
  if (xs.size() > 1) {
    detail::KahanSum sq;
    for (double x : xs) sq += (x - s.mean) * (x - s.mean);
    s.stderr_ = std::sqrt(sq.value() / (n - 1.0) / n);
  }
  return s;
}

struct ReplicateSummary {
  std::vector<std::uint64_t> seeds;
  std::vector<SimResult> runs;  // index order
  Stat optimizer_value_per_round;
  Stat optimizer_spend_per_round;
  Stat learner_spend_per_round;
  Stat lambda_final;
};

/// Independent runs, one per seed (default seed, seed+1, ...), reduced in
/// index order so the summary does not depend on scheduling.
inline ReplicateSummary replicate(const SimConfig& c, std::size_t n_reps, std::vector<std::uint64_t> seeds = {}) {
  if (n_reps < 1) throw Error(ErrorKind::InvalidArgument, "need at least one replication");
  if (seeds.empty()) {
    for (std::size_t i = 0; i < n_reps; ++i) seeds.push_back(c.seed + i);
  }
  if (seeds.size() != n_reps) throw Error(ErrorKind::InvalidArgument, "seed list length must equal n_reps");
  ReplicateSummary out;
  out.seeds = seeds;
  out.runs.resize(n_reps);
  parallel_for(n_reps, thread_count(), [&](std::size_t i) {
    SimConfig ci = c;
    ci.seed = seeds[i];
    out.runs[i] = run(ci);
  });
  std::vector<double> v, s, l, lam;
  for (const auto& r : out.runs) {
    v.push_back(r.optimizer_total_value / double(r.T));
    s.push_back(r.optimizer_total_spend / double(r.T));
    l.push_back(r.learner_total_spend / double(r.T));
    lam.push_back(r.lambda_final);
  }
  out.optimizer_value_per_round = summarize(v);
  out.optimizer_spend_per_round = summarize(s);
  out.learner_spend_per_round = summarize(l);
  out.lambda_final = summarize(lam);
  return out;
}

struct ExpectedPath {
  std::vector<double> lambda;  // λ^{(1)}, ..., λ^{(T+1)}
  double optimizer_value = 0.0;
  double optimizer_spend = 0.0;
  std::int64_t exhausted_at = 0;  // first round a guarded strategy could not pay, 0 if never
};

/// λ_{t+1} = λ_t + η(ρ_L − λ_t·P_L(policy_t)) with payments at their
/// expectations. Guarded strategies stop once the expected spend would pass
/// the budget.
inline ExpectedPath expected_trajectory(const SimConfig& c) {
  c.validate();
  ExpectedPath out;
  out.lambda.reserve(static_cast<std::size_t>(c.T) + 1);
  double lam = c.lambda_initial;
  out.lambda.push_back(lam);
  detail::KahanSum value, spend;
  const double budget = c.rho_O * double(c.T);
  const bool guarded = c.strategy.guarded();
  const Triple idle = expected_triple(c.fmt, BidPolicy::zero(), c.dist);
  for (std::int64_t t = 1; t <= c.T; ++t) {
    Triple tr{};
    if (out.exhausted_at == 0) {
      tr = expected_triple_mixed(c.fmt, c.strategy.policy_at(t, c.T, lam), c.dist);
      if (guarded && spend.value() + lam * tr.P_O > budget * (1.0 + 1e-12)) {
        out.exhausted_at = t;
        tr = idle;
      }
    } else {
      tr = idle;
    }
    value += tr.U;
    spend += lam * tr.P_O;
    lam += c.eta * (c.rho_L - lam * tr.P_L);
    out.lambda.push_back(lam);
  }
  out.optimizer_value = value.value();
  out.optimizer_spend = spend.value();
  return out;
}

}  // namespace bsepace
