#include <gtest/gtest.h>

#include <random>

#include "bsepace/learner.hpp"

using namespace bsepace;

TEST(Learner, BidIsMultiplierTimesValue) {
  auto s = make_learner(1.0, 0.1, 10);
  EXPECT_EQ(learner_bid(s, 0.7), 0.0);
  s.lambda = 6.0;
  EXPECT_EQ(learner_bid(s, 1.0), 6.0);
}

TEST(Learner, UpdateArithmetic) {
  auto s = make_learner(0.5, 0.1, 10, 1.0);
  learner_update(s, 0.5);
  EXPECT_DOUBLE_EQ(s.lambda, 1.0);
  auto z = make_learner(0.5, 0.1, 10);
  learner_update(z, 0.0);
  EXPECT_DOUBLE_EQ(z.lambda, 0.05);
  EXPECT_EQ(z.round, 1);
}

TEST(Learner, RejectsPaymentsAboveTheBidCap) {
  auto s = make_learner(0.5, 0.1, 10, 0.3);
  try {
    learner_update(s, 0.31);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PaymentExceedsBid);
  }
  EXPECT_THROW(make_learner(0.0, 0.1, 10), Error);
  EXPECT_THROW(make_learner(1.0, 1.0, 10), Error);
  EXPECT_THROW(make_learner(1.0, 0.1, 10, -1.0), Error);
}

// Adversary pays a random fraction of λ, sometimes exactly λ.
TEST(Learner, NonNegativeAndBudgetSafeUnderAdversarialPayments) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double rho = 0.05 + u(rng), eta = 0.001 + 0.2 * u(rng);
    const std::int64_t T = 100000;
    auto s = make_learner(rho, eta, T, rho * u(rng));
    for (std::int64_t t = 0; t < T; ++t) {
      const double before = s.lambda;
      const double r = u(rng);
      const double p = r < 0.3 ? s.lambda : r < 0.5 ? 0.0 : s.lambda * u(rng);
      learner_update(s, p);
      ASSERT_GE(s.lambda, 0.0);
      ASSERT_GE(s.lambda, std::min(before, rho) - 1e-12);
      ASSERT_GE(s.budget_remaining(), -1e-9 * s.budget_total);
    }
  }
}

TEST(Learner, TelescopingIdentityOverAMillionRounds) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto s = make_learner(0.37, 1e-3, 1000000);
  for (int t = 0; t < 1000000; ++t) learner_update(s, s.lambda * u(rng));
  const double paid = s.cumulative_payment();
  EXPECT_NEAR(paid, telescoped_payment(s), 1e-9 * paid);
}
