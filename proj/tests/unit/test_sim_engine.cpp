#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "bsepace/bse.hpp"
#include "bsepace/sim.hpp"
#include "fixtures.hpp"

using namespace bsepace;

namespace {
SimConfig counterexample(double delta, std::int64_t T) {
  SimConfig c;
  c.dist = ValueDistribution::delta_cdf_example(delta);
  c.T = T;
  c.eta = resolve_eta("T^{-2/3}", T);
  c.rho_L = 0.5;
  c.rho_O = delta / (8.0 * (1.0 + delta));
  c.seed = 1;
  return c;
}
OptimizerStrategy manipulator(const SimConfig& c, double delta) {
  return OptimizerStrategy::appendix_e(delta, 2.0 * (1.0 + delta) / delta, switch_time_tau(delta, c.eta, c.T));
}
OptimizerStrategy guarded_one() {
  return OptimizerStrategy::budget_guard(OptimizerStrategy::static_policy(BidPolicy::constant(1.0)));
}
}  // namespace

TEST(ResolveEta, RulesAndErrors) {
  EXPECT_DOUBLE_EQ(resolve_eta("0.01", 10), 0.01);
  EXPECT_DOUBLE_EQ(resolve_eta("1/8", 10), 0.125);
  EXPECT_NEAR(resolve_eta("T^{-2/3}", 1000000), 1e-4, 1e-15);
  EXPECT_NEAR(resolve_eta("T^-0.5", 10000), 0.01, 1e-15);
  for (const char* bad : {"abc", "1.5", "0", "T^{1/2}", "1/0", "T^-x"}) {
    try {
      resolve_eta(bad, 1000);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ConfigError) << bad;
    }
  }
}

TEST(Run, DeterministicForAFixedSeed) {
  auto c = counterexample(0.01, 20000);
  c.strategy = manipulator(c, 0.01);
  const auto a = run(c), b = run(c);
  EXPECT_EQ(a.optimizer_total_value, b.optimizer_total_value);
  EXPECT_EQ(a.learner_total_spend, b.learner_total_spend);
  EXPECT_EQ(a.lambda_final, b.lambda_final);
  c.seed = 2;
  EXPECT_NE(run(c).optimizer_total_value, a.optimizer_total_value);
}

TEST(Run, ZeroStrategyFirstPriceSettlesAtBudgetRatio) {
  SimConfig c;
  c.fmt = AuctionFormat::FirstPrice;
  c.T = 200000;
  c.eta = 1e-3;
  c.rho_L = 0.2;
  c.rho_O = 0.1;
  c.seed = 4;
  const auto r = run(c);
  EXPECT_NEAR(r.lambda_final, 0.2 / 0.5, 0.02);
  EXPECT_EQ(r.optimizer_total_value, 0.0);
  EXPECT_EQ(r.learner_violation_rounds, 0);
}

TEST(Run, SpendIdentityAndNoLearnerViolations) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    for (auto fmt : {AuctionFormat::SecondPrice, AuctionFormat::FirstPrice}) {
      SimConfig c;
      c.dist = fixtures::separated_discrete();
      c.fmt = fmt;
      c.T = 50000;
      c.eta = resolve_eta("T^{-2/3}", c.T);
      c.rho_L = 0.3;
      c.rho_O = 0.1;
      c.seed = seed;
      c.record_trajectory = true;
      c.strategy = OptimizerStrategy::budget_guard(
          OptimizerStrategy::static_mixture({{0.5, BidPolicy::mirror()}, {0.5, BidPolicy::constant(0.7)}}));
      const auto r = run(c);
      const double telescoped = c.rho_L * double(c.T) + (c.lambda_initial - r.lambda_final) / c.eta;
      EXPECT_NEAR(r.learner_total_spend, telescoped, 1e-6 * c.T);
      EXPECT_EQ(r.learner_violation_rounds, 0);
      EXPECT_EQ(r.optimizer_violation_rounds, 0);
      EXPECT_GE(r.lambda_min, 0.0);
      ASSERT_FALSE(r.trajectory.empty());
      EXPECT_EQ(r.trajectory.back().t, c.T);
      EXPECT_NEAR(r.trajectory.back().optimizer_value, r.optimizer_total_value, 1e-9);
      // Optimizer value counts only won rounds.
      EXPECT_LE(r.optimizer_total_value, double(r.optimizer_wins) + 1e-9);
      EXPECT_EQ(r.optimizer_total_value > 0.0, r.optimizer_wins > 0);
    }
  }
}

TEST(Run, CounterexampleValueBands) {
  const double delta = 0.01;
  auto c = counterexample(delta, 100000);
  c.strategy = guarded_one();
  const auto s1 = replicate(c, 8);
  c.strategy = manipulator(c, delta);
  const auto s2 = replicate(c, 8);
  EXPECT_NEAR(s1.optimizer_value_per_round.mean, 0.27, 0.02);
  EXPECT_NEAR(s2.optimizer_value_per_round.mean, 0.483, 0.01);
  EXPECT_GT(s2.optimizer_value_per_round.mean, 1.5 * s1.optimizer_value_per_round.mean);
  for (const auto& r : s2.runs) {
    EXPECT_EQ(r.optimizer_violation_rounds, 0);
    EXPECT_EQ(r.learner_violation_rounds, 0);
  }
}

TEST(Replicate, MatchesSingleRunsAndSeedList) {
  auto c = counterexample(0.02, 20000);
  c.strategy = manipulator(c, 0.02);
  c.seed = 17;
  const auto one = replicate(c, 1);
  EXPECT_EQ(one.runs[0].optimizer_total_value, run(c).optimizer_total_value);
  EXPECT_EQ(one.optimizer_value_per_round.stderr_, 0.0);
  const auto same = replicate(c, 3, {5, 5, 5});
  EXPECT_EQ(same.runs[0].optimizer_total_value, same.runs[2].optimizer_total_value);
  EXPECT_NEAR(same.optimizer_value_per_round.stderr_, 0.0, 1e-15);
  EXPECT_THROW(replicate(c, 2, {1}), Error);
  EXPECT_THROW(replicate(c, 0), Error);
}

TEST(Replicate, StandardErrorShrinksWithReplications) {
  auto c = counterexample(0.01, 20000);
  c.strategy = guarded_one();
  const auto few = replicate(c, 8), many = replicate(c, 32);
  ASSERT_GT(few.optimizer_value_per_round.stderr_, 0.0);
  const double ratio = many.optimizer_value_per_round.stderr_ / few.optimizer_value_per_round.stderr_;
  EXPECT_GT(ratio, 0.2);
  EXPECT_LT(ratio, 0.9);
}

TEST(Replicate, ThreadCountDoesNotChangeResults) {
  auto c = counterexample(0.01, 20000);
  c.strategy = manipulator(c, 0.01);
  ::setenv("BSEPACE_THREADS", "1", 1);
  EXPECT_EQ(thread_count(), 1u);
  const auto a = replicate(c, 6);
  ::setenv("BSEPACE_THREADS", "4", 1);
  EXPECT_EQ(thread_count(), 4u);
  const auto b = replicate(c, 6);
  ::setenv("BSEPACE_THREADS", "zero", 1);
  EXPECT_GE(thread_count(), 1u);
  ::unsetenv("BSEPACE_THREADS");
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a.runs[i].optimizer_total_value, b.runs[i].optimizer_total_value);
  EXPECT_EQ(a.optimizer_value_per_round.mean, b.optimizer_value_per_round.mean);
}

TEST(ExpectedPath, FixedPointIsStationary) {
  SimConfig c;
  c.dist = fixtures::two_point();
  c.rho_L = 1.0;
  c.rho_O = 0.25;
  c.T = 5000;
  c.eta = 0.01;
  c.lambda_initial = 1.5;
  c.strategy = OptimizerStrategy::static_policy(BidPolicy::constant(1.0));
  const auto e = expected_trajectory(c);
  for (double l : e.lambda) EXPECT_NEAR(l, 1.5, 1e-12);
  EXPECT_NEAR(e.optimizer_value, c.T / 3.0, 1e-6);
}

TEST(ExpectedPath, ConvergesWithinOrderOneOverEta) {
  SimConfig c;
  c.dist = fixtures::two_point();
  c.rho_L = 1.0;
  c.rho_O = 0.25;
  c.T = 5000;
  c.eta = 0.01;
  c.strategy = OptimizerStrategy::static_policy(BidPolicy::constant(1.0));
  const auto e = expected_trajectory(c);
  const auto C = static_cast<std::size_t>(10.0 / c.eta);
  EXPECT_NEAR(e.lambda[C], 1.5, 0.01);
  for (std::size_t t = 1; t < e.lambda.size(); ++t) EXPECT_GE(e.lambda[t], e.lambda[t - 1] - 1e-12);
}

// After the switch the multiplier climbs at least at rate η/(2(1+δ)) and at
// most at rate ηρ_L.
TEST(ExpectedPath, CounterexampleGrowthAfterSwitch) {
  const double delta = 0.01;
  auto c = counterexample(delta, 100000);
  c.strategy = manipulator(c, delta);
  const auto tau = c.strategy.tau();
  const auto e = expected_trajectory(c);
  EXPECT_EQ(e.exhausted_at, 0);
  const std::int64_t ts = c.T / 2 - tau;
  for (std::int64_t t = ts; t <= c.T; t += 500) {
    const double lo = 1.0 + double(t - ts) * c.eta / (2.0 * (delta + 1.0));
    const double hi = e.lambda[ts] + double(t - ts) * c.eta * c.rho_L;
    EXPECT_GE(e.lambda[t], lo - 1e-4) << t;
    EXPECT_LE(e.lambda[t], hi + 1e-9) << t;
  }
  EXPECT_NEAR(e.optimizer_value / double(c.T), 0.4844, 0.005);
}

TEST(ExpectedPath, GuardStopsAtBudget) {
  auto c = counterexample(0.01, 100000);
  c.strategy = guarded_one();
  const auto e = expected_trajectory(c);
  EXPECT_GT(e.exhausted_at, 0);
  EXPECT_LE(e.optimizer_spend, c.rho_O * double(c.T) * (1.0 + 1e-9));
}
