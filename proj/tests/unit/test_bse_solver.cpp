#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bsepace/bse.hpp"
#include "fixtures.hpp"

using namespace bsepace;
using fixtures::problem;

TEST(FiniteGame, StackelbergValueUnderBudget) {
  EXPECT_NEAR(se_value(fixtures::small_game(0.0), 0.0).value, 1.0, 1e-9);
  EXPECT_NEAR(se_value(fixtures::small_game(0.5), 0.5).value, 1.0, 1e-9);
  EXPECT_NEAR(se_value(fixtures::small_game(3.0), 3.0).value, 3.0, 1e-9);
}

TEST(FiniteGame, BudgetedEquilibriumMixesTwoPhases) {
  const auto g = fixtures::small_game(0.5);
  const auto b = bse_finite(g);
  EXPECT_NEAR(b.value, 4.0 / 3.0, 1e-9);
  EXPECT_NEAR(b.spend[0], 0.5, 1e-9);
  ASSERT_EQ(b.phases.size(), 2u);
  std::vector<double> z;
  for (const auto& ph : b.phases) {
    z.push_back(ph.z);
    EXPECT_TRUE(is_best_response(g, ph.x, ph.b));
  }
  std::sort(z.begin(), z.end());
  EXPECT_NEAR(z[0], 1.0 / 6.0, 1e-9);
  EXPECT_NEAR(z[1], 5.0 / 6.0, 1e-9);
}

TEST(FiniteGame, EquilibriumDominatesStackelbergAcrossBudgets) {
  for (int i = 0; i <= 30; ++i) {
    const double rho = 0.1 * i;
    const auto g = fixtures::small_game(rho);
    const double se = se_value(g, g.rho).value, bse = bse_finite(g).value;
    EXPECT_GE(bse, se - 1e-9) << rho;
    EXPECT_LE(bse, 3.0 + 1e-9);
  }
}

namespace {
FiniteGame random_game(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FiniteGame g;
  auto mat = [&] {
    Matrix M(n, std::vector<double>(m));
    for (auto& r : M) {
      for (auto& v : r) v = u(rng);
    }
    return M;
  };
  g.U_O = mat();
  g.U_L = mat();
  for (std::size_t j = 0; j < k; ++j) {
    g.P.push_back(mat());
    g.rho.push_back(0.2 + 0.5 * u(rng));
  }
  return g;
}
}  // namespace

// Random mixtures of best-response pairs never beat the LP optimum.
TEST(FiniteGame, RandomGamesAgainstBruteForce) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t k = 1 + trial % 2;
    const auto g = random_game(rng, 3, 3, k);
    FiniteBse b;
    try {
      b = bse_finite(g);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Infeasible);
      continue;
    }
    EXPECT_LE(b.phases.size(), k + 1);
    for (std::size_t j = 0; j < k; ++j) EXPECT_LE(b.spend[j], g.rho[j] + 1e-9);
    for (const auto& ph : b.phases) EXPECT_TRUE(is_best_response(g, ph.x, ph.b, 1e-7));
    EXPECT_GE(b.value, se_value(g, g.rho).value - 1e-9);
    for (int s = 0; s < 4000; ++s) {
      std::vector<double> x(3);
      double tot = 0.0;
      for (auto& xi : x) tot += (xi = -std::log(u(rng)));
      for (auto& xi : x) xi /= tot;
      const std::size_t c = rng() % 3;
      if (!is_best_response(g, x, c)) continue;
      bool ok = true;
      for (std::size_t j = 0; j < k; ++j) ok = ok && bilinear(g.P[j], x, c) <= g.rho[j];
      if (ok) {
        EXPECT_LE(bilinear(g.U_O, x, c), b.value + 1e-9);
      }
    }
  }
}

TEST(FiniteGame, RejectsMalformedGames) {
  FiniteGame g = fixtures::small_game(0.5);
  g.rho.push_back(1.0);
  EXPECT_THROW(se_value(g, g.rho), Error);
  g = fixtures::small_game(-1.0);
  try {
    bse_finite(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Infeasible);
  }
}

TEST(Auction, TwoPointSinglePhaseAndEquilibriumValues) {
  for (double rho : {0.05, 0.1, 0.2, 0.3, 0.5, 0.8}) {
    const AuctionEngine eng(problem(fixtures::two_point(), 1.0, rho));
    const auto sp = single_phase_value(eng, rho);
    ASSERT_TRUE(sp.has_value());
    const auto b = auction_bse(eng);
    if (rho <= 0.25) {
      EXPECT_NEAR(sp->value(), rho / (1.0 - rho), 1e-7) << rho;
      EXPECT_NEAR(b.value, 4.0 * rho / 3.0, 1e-7) << rho;
    } else {
      const double v = 1.0 - 5.0 / (6.0 * (1.0 + rho));
      EXPECT_NEAR(sp->value(), v, 1e-7) << rho;
      EXPECT_NEAR(b.value, v, 1e-7) << rho;
    }
    EXPECT_NEAR(b.spend, rho, 1e-7);
    EXPECT_NEAR(b.duality_gap, 0.0, 1e-7);
  }
  const AuctionEngine eng(problem(fixtures::two_point(), 1.0, 0.25));
  EXPECT_NEAR(single_phase_value(eng, 0.25)->lambda, 1.5, 1e-6);
}

TEST(Auction, WarmupUniformInstance) {
  const auto p = problem(ValueDistribution::independent_uniform(), 1.0, 1.0);
  const auto b = auction_bse(p);
  EXPECT_NEAR(b.value, 0.359117, 1e-6);
  EXPECT_NEAR(b.dual.mu, 0.119706, 1e-5);
  EXPECT_NEAR(b.dual.r_star, 0.239411, 1e-6);
  EXPECT_NEAR(b.spend, 1.0, 1e-7);
  for (const auto& [q, ph] : b.phases) {
    EXPECT_NEAR(ph.lambda, 4.8231, 1e-3);
    EXPECT_GE(ph.lambda * ph.triple.P_L, p.rho_L * (1.0 - 1e-9));
  }
  EXPECT_NEAR(mirror_pacing_lambda(p), 6.0, 1e-9);
  const auto lr = lagrangian_reward(p, b.dual.mu);
  EXPECT_NEAR(lr.r_star, b.dual.r_star, 1e-7);
}

TEST(Auction, LagrangianRewardIsNonIncreasingInMu) {
  const AuctionEngine eng(problem(fixtures::two_point(), 1.0, 0.5));
  double prev = lagrangian_reward(eng, 0.0).r_star;
  EXPECT_GE(prev, 5.0 / 6.0 - 1e-9);
  for (double mu : {0.1, 0.3, 0.5, 1.0, 2.0, 5.0}) {
    const double r = lagrangian_reward(eng, mu).r_star;
    EXPECT_LE(r, prev + 1e-9) << mu;
    prev = r;
  }
  EXPECT_THROW(lagrangian_reward(eng, -1.0), Error);
}

TEST(Auction, CounterexampleDual) {
  const double delta = 0.01;
  const auto d = dual_opt(problem(ValueDistribution::delta_cdf_example(delta), 0.5, delta / (8.0 * (1.0 + delta))));
  EXPECT_NEAR(d.opt, 0.25, 1e-7);
  EXPECT_NEAR(d.r_star, 0.0, 1e-7);
  EXPECT_NEAR(d.mu, 2.0 * (1.0 + delta) / delta, 1e-3);
}

TEST(Auction, SlackBudgetGivesZeroMultiplier) {
  const auto p = problem(fixtures::separated_discrete(), 0.3, 5.0);
  const auto d = dual_opt(p);
  EXPECT_LT(d.mu, 1e-6);
  EXPECT_NEAR(d.opt, lagrangian_reward(p, 0.0).r_star, 1e-8);
}

TEST(Auction, WeakDualityAndLearnerFeasibility) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto inst = fixtures::random_separated(seed);
    const AuctionEngine eng(problem(inst.dist, inst.rho_L, inst.rho_O));
    const auto b = auction_bse(eng);
    EXPECT_LE(b.spend, inst.rho_O + 1e-8);
    EXPECT_NEAR(b.duality_gap, 0.0, 1e-6) << seed;
    for (const auto& [q, ph] : b.phases) {
      if (!ph.null_phase) {
        EXPECT_GE(ph.lambda * ph.triple.P_L, inst.rho_L * (1.0 - 1e-9));
      }
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int k = 0; k < 20; ++k) {
      const double mu = u(rng);
      EXPECT_GE(lagrangian_reward(eng, mu).r_star + mu * inst.rho_O, b.value - 1e-8);
    }
  }
}

// Brute force over a dense grid of constant fake values on two phases.
TEST(Auction, NoTwoConstantPhasesBeatTheEquilibrium) {
  const auto dist = fixtures::two_point();
  const double rho = 0.2;
  const auto b = auction_bse(problem(dist, 1.0, rho));
  struct Pt {
    double s, u;
  };
  std::vector<Pt> pts{{0.0, dist.null_value()}};
  for (int i = 1; i <= 200; ++i) {
    const double h = i / 100.0;
    const auto t = expected_triple(AuctionFormat::SecondPrice, BidPolicy::constant(h), dist);
    if (!(t.P_L > 0.0)) continue;
    const double lam = 1.0 / t.P_L;  // learner pays exactly her budget
    pts.push_back({lam * t.P_O, t.U});
  }
  for (const auto& a : pts) {
    for (const auto& c : pts) {
      for (int k = 0; k <= 20; ++k) {
        const double q = k / 20.0;
        if (q * a.s + (1 - q) * c.s <= rho + 1e-12) {
          EXPECT_LE(q * a.u + (1 - q) * c.u, b.value + 1e-9);
        }
      }
    }
  }
}

TEST(Auction, SingleLearnerAtomUsesTheGrid) {
  auto p = problem(ValueDistribution::product(Marginal::point(1.0), Marginal::point(1.0)), 0.5, 0.25);
  const auto b = auction_bse(p);
  EXPECT_GE(b.value, 0.0);
  EXPECT_LE(b.spend, 0.25 + 1e-8);
  EXPECT_NEAR(b.duality_gap, 0.0, 1e-6);
}

TEST(Auction, ErrorKinds) {
  const auto zero_learner = ValueDistribution::product(Marginal::point(0.0), Marginal::uniform());
  try {
    auction_bse(problem(zero_learner, 1.0, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyFrontier);
  }
  const auto zero_opt = ValueDistribution::product(Marginal::uniform(), Marginal::point(0.0));
  try {
    dual_opt(problem(zero_opt, 1.0, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateDistribution);
  }
  EXPECT_THROW(AuctionEngine(problem(fixtures::two_point(), 0.0, 1.0)), Error);
}

TEST(Auction, FirstPriceEquilibriumIsConsistent) {
  const auto p = problem(fixtures::separated_discrete(), 0.3, 0.1, AuctionFormat::FirstPrice);
  const auto b = auction_bse(p);
  EXPECT_LE(b.spend, 0.1 + 1e-8);
  EXPECT_NEAR(b.duality_gap, 0.0, 1e-6);
}
