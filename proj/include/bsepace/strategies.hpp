#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bsepace/errors.hpp"
#include "bsepace/model.hpp"

namespace bsepace {

/// What the optimizer observes before acting in round t.
struct StrategyContext {
  std::int64_t t = 1;  // 1-based
  std::int64_t T = 1;
  double lambda = 0.0;
  double v_O = 0.0;
  double budget_remaining = 0.0;
  AuctionFormat fmt = AuctionFormat::SecondPrice;
};

/// Largest payment the optimizer can incur this round by declaring h.
inline double max_round_payment(AuctionFormat fmt, double lambda, double h) {
  if (h <= 0.0) return 0.0;
  return fmt == AuctionFormat::FirstPrice ? lambda * h : lambda * std::min(h, 1.0);
}

struct SchedulePhase {
  double fraction;
  Mixture mixture;
};

/// Leading-order switch time for the counterexample manipulation:
/// round(δ/2 · T^{1−δ} / η^δ).
inline std::int64_t switch_time_tau(double delta, double eta, std::int64_t T) {
  if (!(delta > 0.0 && delta < 1.0) || !(eta > 0.0 && eta < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "switch time needs delta, eta in (0, 1)");
  }
  const double Td = static_cast<double>(T);
  return std::llround(0.5 * delta * std::pow(Td, 1.0 - delta) / std::pow(eta, delta));
}

class OptimizerStrategy {
 public:
  enum class Kind { StaticPolicy, PhaseSchedule, AppendixEManipulator, BudgetGuard };

  static OptimizerStrategy static_policy(BidPolicy policy) {
    OptimizerStrategy s(Kind::StaticPolicy);
    s.phases_.push_back({1.0, {{1.0, std::move(policy)}}});
    return s;
  }

  static OptimizerStrategy static_mixture(Mixture mixture) {
    OptimizerStrategy s(Kind::StaticPolicy);
    s.phases_.push_back({1.0, std::move(mixture)});
    s.validate();
    return s;
  }

  static OptimizerStrategy phase_schedule(std::vector<SchedulePhase> phases) {
    OptimizerStrategy s(Kind::PhaseSchedule);
    s.phases_ = std::move(phases);
    s.validate();
    return s;
  }

  /// Mirror pacing (fake value 1) until T/2 − τ, then declare 1/(λμ) so the
  /// bid is the constant 1/μ; nothing once the budget cannot cover a round.
  static OptimizerStrategy appendix_e(double delta, double mu, std::int64_t tau) {
    if (!(mu > 0.0)) throw Error(ErrorKind::InvalidArgument, "mu must be positive");
    OptimizerStrategy s(Kind::AppendixEManipulator);
    s.delta_ = delta;
    s.mu_ = mu;
    s.tau_ = tau;
    return s;
  }

  static OptimizerStrategy budget_guard(OptimizerStrategy inner) {
    OptimizerStrategy s(Kind::BudgetGuard);
    s.inner_ = std::make_shared<const OptimizerStrategy>(std::move(inner));
    return s;
  }

  Kind kind() const { return kind_; }
  double delta() const { return delta_; }
  double mu() const { return mu_; }
  std::int64_t tau() const { return tau_; }
  const std::vector<SchedulePhase>& phases() const { return phases_; }
  const OptimizerStrategy* inner() const { return inner_.get(); }
  bool guarded() const {
    return kind_ == Kind::BudgetGuard || kind_ == Kind::AppendixEManipulator || (inner_ && inner_->guarded());
  }

  /// Policy mixture in force at round t when the learner's multiplier is λ,
  /// before any budget check.
  Mixture policy_at(std::int64_t t, std::int64_t T, double lambda) const {
    switch (kind_) {
      case Kind::StaticPolicy: return phases_.front().mixture;
      case Kind::PhaseSchedule: {
        double cum = 0.0;
        const double Td = static_cast<double>(T);
        for (std::size_t j = 0; j < phases_.size(); ++j) {
          cum += phases_[j].fraction;
          if (static_cast<double>(t) <= cum * Td + 1e-9 || j + 1 == phases_.size()) return phases_[j].mixture;
        }
        return phases_.back().mixture;
      }
      case Kind::AppendixEManipulator: {
        if (2 * (t + tau_) <= T) return {{1.0, BidPolicy::constant(1.0)}};
        const double cap = BidPolicy::kDefaultCap;
        const double h = lambda > 0.0 ? std::min(cap, 1.0 / (lambda * mu_)) : cap;
        return {{1.0, BidPolicy::constant(h)}};
      }
      case Kind::BudgetGuard: return inner_->policy_at(t, T, lambda);
    }
    return {};
  }

  /// Fake value declared in round t. `u` is a uniform draw used to pick an
  /// atom of a mixed phase.
  double act(const StrategyContext& ctx, double u) const {
    const Mixture m = policy_at(ctx.t, ctx.T, ctx.lambda);
    double h = pick(m, u)(ctx.v_O);
    if (guarded() && ctx.budget_remaining < max_round_payment(ctx.fmt, ctx.lambda, h)) h = 0.0;
    return h;
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::StaticPolicy: return "static";
      case Kind::PhaseSchedule: return "phases(" + std::to_string(phases_.size()) + ")";
      case Kind::AppendixEManipulator: return "appendix-e(tau=" + std::to_string(tau_) + ")";
      case Kind::BudgetGuard: return "guard(" + inner_->describe() + ")";
    }
    return "";
  }

  static const BidPolicy& pick(const Mixture& m, double u) {
    double c = 0.0;
    for (const auto& [w, p] : m) {
      c += w;
      if (u < c) return p;
    }
    for (auto it = m.rbegin(); it != m.rend(); ++it) {
      if (it->first > 0.0) return it->second;
    }
    return m.back().second;
  }

 private:
  explicit OptimizerStrategy(Kind k) : kind_(k) {}

  void validate() const {
    double total = 0.0;
    for (const auto& ph : phases_) {
      if (!(ph.fraction >= 0.0)) throw Error(ErrorKind::InvalidArgument, "negative phase fraction");
      if (ph.mixture.empty()) throw Error(ErrorKind::InvalidArgument, "empty phase mixture");
      total += ph.fraction;
      double w = 0.0;
      for (const auto& [wi, p] : ph.mixture) {
        if (!(wi >= 0.0)) throw Error(ErrorKind::InvalidArgument, "negative mixture weight");
        w += wi;
      }
      if (std::abs(w - 1.0) > 1e-9) throw Error(ErrorKind::InvalidArgument, "mixture weights must sum to 1");
    }
    if (phases_.empty() || std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorKind::InvalidArgument, "phase fractions must sum to 1");
    }
  }

  Kind kind_;
  std::vector<SchedulePhase> phases_;
  std::shared_ptr<const OptimizerStrategy> inner_;
  double delta_ = 0.0, mu_ = 0.0;
  std::int64_t tau_ = 0;
};

}  // namespace bsepace
