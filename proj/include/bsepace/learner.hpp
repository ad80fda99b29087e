#pragma once

#include <cassert>
#include <cstdint>

#include "bsepace/detail/numeric.hpp"
#include "bsepace/errors.hpp"

namespace bsepace {

/// Budget-pacing learner: bids λ·v_L and moves λ by η times the gap between
/// the per-round budget and the realized payment.
struct LearnerState {
  double lambda = 0.0;
  double eta = 0.01;
  double rho_L = 1.0;
  double budget_total = 0.0;
  std::int64_t round = 0;
  detail::KahanSum paid;
  double lambda_initial = 0.0;

  double cumulative_payment() const { return paid.value(); }
  double budget_remaining() const { return budget_total - paid.value(); }
};

inline LearnerState make_learner(double rho_L, double eta, std::int64_t horizon, double lambda_initial = 0.0) {
  if (!(rho_L > 0.0)) throw Error(ErrorKind::InvalidArgument, "rho_L must be positive");
  if (!(eta > 0.0 && eta < 1.0)) throw Error(ErrorKind::InvalidArgument, "eta must lie in (0, 1)");
  if (!(lambda_initial >= 0.0)) throw Error(ErrorKind::InvalidArgument, "initial multiplier must be >= 0");
  LearnerState s;
  s.lambda = lambda_initial;
  s.lambda_initial = lambda_initial;
  s.eta = eta;
  s.rho_L = rho_L;
  s.budget_total = rho_L * static_cast<double>(horizon);
  return s;
}

inline double learner_bid(const LearnerState& s, double v_L) { return s.lambda * v_L; }

/// λ' = λ + η(ρ_L − p). Payments above the bid λ·1 are a rule violation upstream.
inline void learner_update(LearnerState& s, double payment) {
  if (payment > s.lambda * (1.0 + 1e-12) + 1e-15) {
    throw Error(ErrorKind::PaymentExceedsBid,
                "payment " + std::to_string(payment) + " exceeds bid cap " + std::to_string(s.lambda));
  }
  s.lambda += s.eta * (s.rho_L - payment);
  assert(s.lambda >= -1e-12);
  s.paid += payment;
  ++s.round;
}

/// ρ_L·t + (λ₁ − λ_t)/η: what the telescoped update says has been paid.
inline double telescoped_payment(const LearnerState& s) {
  return s.rho_L * static_cast<double>(s.round) + (s.lambda_initial - s.lambda) / s.eta;
}

}  // namespace bsepace
