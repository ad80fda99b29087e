#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bsepace/dual.hpp"
#include "fixtures.hpp"

using namespace bsepace;
using fixtures::problem;

namespace {
struct Warmup {
  AuctionEngine eng{problem(ValueDistribution::independent_uniform(), 1.0, 1.0)};
  DualSolution d = dual_opt(eng);
};
const Warmup& warmup() {
  static const Warmup w;
  return w;
}
}  // namespace

TEST(DualF, LinearInGAtZeroMultiplier) {
  const auto& w = warmup();
  const double a = dual_f(w.eng, w.d.mu, 0.0, 0.0);
  for (double g : {-3.0, -1.0, -0.25, 0.5}) EXPECT_NEAR(dual_f(w.eng, w.d.mu, 0.0, g), a + g, 1e-12);
}

TEST(DualF, ConvexInG) {
  const auto& w = warmup();
  for (double lam : {0.5, 2.0, 4.0, 7.0}) {
    for (double g = -2.0; g <= 0.0; g += 0.1) {
      const double h = 0.05;
      const double mid = dual_f(w.eng, w.d.mu, lam, g);
      const double avg = 0.5 * (dual_f(w.eng, w.d.mu, lam, g - h) + dual_f(w.eng, w.d.mu, lam, g + h));
      EXPECT_LE(mid, avg + 1e-9) << lam << " " << g;
    }
  }
}

TEST(GStar, WarmupAnchorsAndLevelSet) {
  const auto& w = warmup();
  const auto g0 = g_star(w.eng, w.d.mu, 0.0, w.d.r_star);
  EXPECT_NEAR(g0.g, -0.260589, 1e-5);
  for (double lam = 0.0; lam <= 8.0; lam += 0.25) {
    const auto r = g_star(w.eng, w.d.mu, lam, w.d.r_star);
    ASSERT_TRUE(std::isfinite(r.g)) << lam;
    EXPECT_LE(r.g, 0.0);
    EXPECT_LE(dual_f(w.eng, w.d.mu, lam, r.g), w.d.r_star + 1e-9) << lam;
    // Largest feasible g: slightly above it the level is broken, unless g* = 0.
    if (r.g < 0.0) {
      EXPECT_GT(dual_f(w.eng, w.d.mu, lam, r.g + 1e-6), w.d.r_star) << lam;
    }
  }
}

TEST(GStar, VanishesBeyondSeparationBound) {
  const AuctionEngine eng(problem(fixtures::separated_discrete(), 0.3, 0.1));
  const auto d = dual_opt(eng);
  const double bound = 1.0 / (d.mu * eng.problem().dist.epsilon_sep());
  for (double f : {1.0, 1.5, 3.0, 10.0}) EXPECT_EQ(g_star(eng, d.mu, bound * f, d.r_star).g, 0.0);
}

TEST(GStar, CounterexampleNeverReachesZero) {
  const double delta = 0.01;
  const AuctionEngine eng(problem(ValueDistribution::delta_cdf_example(delta), 0.5, delta / (8.0 * (1.0 + delta))));
  const auto d = dual_opt(eng);
  for (double lam : {1.0, 10.0, 100.0, 1e3, 1e4}) EXPECT_LT(g_star(eng, d.mu, lam, d.r_star).g, 0.0) << lam;
  CurveOptions co;
  co.diag_lambda_max = 20.0;
  try {
    dual_curve(eng, d.mu, d.r_star, 0.05, co);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnboundedPotential);
  }
  const auto c = dual_curve_unchecked(eng, d.mu, d.r_star, 0.05, co);
  EXPECT_FALSE(c.bounded);
  EXPECT_FALSE(c.lambda_bar.has_value());
  try {
    separation_constant(c, 1e-3, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingSeparation);
  }
}

TEST(Smoothing, ZeroAndStepInputs) {
  std::vector<double> lam, zero, step;
  for (int i = 0; i <= 100; ++i) {
    lam.push_back(0.01 * i);
    zero.push_back(0.0);
    step.push_back(i < 50 ? -1.0 : 0.0);
  }
  const auto z = smooth_and_integrate(lam, zero, 0.1);
  for (std::size_t i = 0; i < lam.size(); ++i) {
    EXPECT_EQ(z.g_sigma[i], 0.0);
    EXPECT_EQ(z.G_sigma[i], 0.0);
  }
  const auto s = smooth_and_integrate(lam, step, 0.1);
  EXPECT_NEAR(s.g_sigma[0], -1.0, 1e-12);
  EXPECT_NEAR(s.g_sigma[60], 0.0, 1e-12);
  // Interpolated step has area 0.495; the forward window loses σ/2 of it at
  // the left edge.
  EXPECT_NEAR(s.G_sigma[0], 0.445, 1e-9);
  for (std::size_t i = 1; i < lam.size(); ++i) EXPECT_LE(s.G_sigma[i], s.G_sigma[i - 1] + 1e-15);
}

TEST(Smoothing, RejectsUnboundedInput) {
  std::vector<double> lam{0.0, 0.1, 0.2}, g{-1.0, -1.0, -0.5};
  EXPECT_THROW(smooth_and_integrate(lam, g, 0.1), Error);
  g = {-1.0, -detail::kInf, 0.0};
  EXPECT_THROW(smooth_and_integrate(lam, g, 0.1), Error);
  g = {-1.0, -0.5, 0.0};
  EXPECT_THROW(smooth_and_integrate(lam, g, 0.15), Error);
}

TEST(Curve, WarmupShape) {
  const auto& w = warmup();
  const double sigma = std::sqrt(1e-3);
  const auto c = dual_curve(w.eng, w.d.mu, w.d.r_star, sigma);
  ASSERT_TRUE(c.lambda_bar.has_value());
  EXPECT_NEAR(*c.lambda_bar, 5.6093, 1e-3);
  EXPECT_TRUE(c.lambda_bar_scan_found);
  EXPECT_NEAR(c.g0, -0.260589, 1e-5);
  EXPECT_NEAR(c.step, curve_step(sigma), 0.0);
  double lip = 0.0;
  for (std::size_t i = 0; i + 1 < c.lambda.size(); ++i) {
    EXPECT_LE(c.g_star[i], 0.0);
    EXPECT_GE(c.G_sigma[i], -1e-12);
    EXPECT_LE(c.G_sigma[i + 1], c.G_sigma[i] + 1e-12);
    // g*_σ lies between the window extremes of g*.
    lip = std::max(lip, std::abs(c.g_star_sigma[i + 1] - c.g_star_sigma[i]) / c.step);
  }
  // Averaging over a window of width σ bounds the slope by max|g*|/σ.
  EXPECT_LE(lip, std::abs(c.g0) / sigma * (1.0 + 1e-6) + 1e-9);
  EXPECT_LE(c.G_sigma.front(), *c.lambda_bar * std::abs(c.g0) + 1e-9);
}

TEST(SeparationConstant, FormulaAndLowerBound) {
  const auto& w = warmup();
  const double sigma = 0.05, eta = 1e-3;
  const auto c = dual_curve(w.eng, w.d.mu, w.d.r_star, sigma);
  const double lb = std::max(*c.lambda_bar, 1.0);
  const double drift = (lb - eta) / (1.0 - eta);
  const double expect = c.R_star + c.mu * sigma - eta * ((1.0 + drift * drift) / sigma) * c.g0;
  EXPECT_NEAR(separation_constant(c, eta, 1.0), expect, 1e-14);
  EXPECT_GE(separation_constant(c, eta, 1.0), c.R_star);
  EXPECT_THROW(separation_constant(c, 1.0, 1.0), Error);
}

TEST(ValueIteration, FirstStageIsTheKernel) {
  const AuctionEngine eng(problem(fixtures::separated_discrete(), 0.3, 0.1));
  const auto d = dual_opt(eng);
  const double eta = 1e-3;
  std::vector<double> grid;
  for (int i = 0; i <= 200; ++i) grid.push_back(0.05 * i);
  const auto t = dp_oracle(eng, d.mu, eta, grid, 20);
  EXPECT_TRUE(t.extended);
  EXPECT_FALSE(t.grid_escape);
  for (std::size_t i = 0; i < t.checked_nodes; i += 10) {
    const double lam = t.lambda[i];
    // Stage reward U − μλP_O − ... with the continuation R_0 = 0.
    EXPECT_NEAR(t.R[1][i], eng.kernel(1.0, -d.mu * lam, 0.0).obj, 1e-9) << lam;
  }
  for (std::size_t tau = 1; tau < t.R.size(); ++tau) {
    for (std::size_t i = 0; i < t.checked_nodes; ++i) EXPECT_GE(t.R[tau][i], t.R[tau - 1][i] - 1e-12);
  }
  const AuctionEngine cont(problem(ValueDistribution::independent_uniform(), 1, 1));
  EXPECT_THROW(dp_oracle(cont, 0.1, eta, grid, 5), Error);
}

TEST(ValueIteration, SmallHorizonCertificate) {
  const AuctionEngine eng(problem(fixtures::separated_discrete(), 0.3, 0.1));
  const auto d = dual_opt(eng);
  const double eta = 1e-3, sigma = std::sqrt(eta);
  const auto c = dual_curve(eng, d.mu, d.r_star, sigma);
  const auto t = dp_oracle(eng, c.mu, eta, c.lambda, 300);
  const auto cert = certify_separation(c, t, eta, eng.problem().rho_L);
  EXPECT_TRUE(cert.pass) << cert.worst_margin << " at tau " << cert.worst_tau;
  EXPECT_GT(cert.cells, 0u);
}

// On random separated instances the bound holds both at the level set and
// after smoothing: f(λ, g*_σ(λ)) stays within μσ of R*.
TEST(Curve, RandomInstancesSmoothedLevel) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = fixtures::random_separated(seed);
    const AuctionEngine eng(problem(inst.dist, inst.rho_L, inst.rho_O));
    const auto d = dual_opt(eng);
    if (!(d.mu > 1e-6)) continue;
    const double sigma = 0.05;
    const auto c = dual_curve(eng, d.mu, d.r_star, sigma);
    ASSERT_TRUE(c.bounded) << seed;
    EXPECT_LE(*c.lambda_bar, c.lambda_bar_bound * (1.0 + 1e-9) + 1e-9) << seed;
    for (std::size_t i = 0; i < c.lambda.size(); i += 7) {
      const double lam = c.lambda[i];
      EXPECT_LE(dual_f(eng, c.mu, lam, c.g_star[i]), c.R_star + 1e-8) << seed << " " << lam;
      EXPECT_LE(dual_f(eng, c.mu, lam, c.g_star_sigma[i]), c.R_star + c.mu * sigma + 1e-8) << seed << " " << lam;
    }
  }
}
