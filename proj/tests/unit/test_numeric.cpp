#include <gtest/gtest.h>

#include <cmath>

#include "bsepace/detail/numeric.hpp"
#include "bsepace/detail/quadrature.hpp"
#include "bsepace/detail/simplex.hpp"

using namespace bsepace;

TEST(Numeric, KahanSumKeepsSmallTerms) {
  detail::KahanSum s;
  s += 1.0;
  for (int i = 0; i < 1000000; ++i) s += 1e-16;
  EXPECT_NEAR(s.value(), 1.0 + 1e-10, 1e-15);
}

TEST(Numeric, CounterRngIsPureFunctionOfKey) {
  detail::CounterRng a(42), b(42), c(43);
  for (std::uint64_t i = 0; i < 100; ++i) {
    EXPECT_EQ(a.uniform(i, 0), b.uniform(i, 0));
    EXPECT_NE(a.uniform(i, 0), c.uniform(i, 0));
    EXPECT_NE(a.uniform(i, 0), a.uniform(i, 1));
  }
  double mean = 0.0;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    const double u = a.uniform(i, 2);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u;
  }
  EXPECT_NEAR(mean / 100000.0, 0.5, 0.005);
}

TEST(Numeric, GoldenFindsInteriorAndEndpointMinima) {
  auto r = detail::golden_minimize([](double x) { return (x - 0.3) * (x - 0.3); }, 0.0, 1.0, 1e-10);
  EXPECT_NEAR(r.x, 0.3, 1e-8);
  auto e = detail::golden_minimize([](double x) { return x; }, 2.0, 5.0, 1e-10);
  EXPECT_DOUBLE_EQ(e.x, 2.0);
}

TEST(Numeric, QuadratureHandlesKinksAtBreaks) {
  auto r = detail::integrate_scalar([](double x) { return x * x; }, 0.0, 1.0, 1e-12);
  EXPECT_NEAR(r, 1.0 / 3.0, 1e-12);
  const double k = 0.37;
  auto kink = detail::integrate_scalar([&](double x) { return std::abs(x - k); }, 0.0, 1.0, 1e-12, {k});
  EXPECT_NEAR(kink, (k * k + (1 - k) * (1 - k)) / 2.0, 1e-12);
  auto root = detail::integrate_scalar([](double x) { return std::pow(x, 0.05); }, 0.0, 0.5, 1e-10);
  EXPECT_NEAR(root, std::pow(0.5, 1.05) / 1.05, 1e-9);
}

TEST(Simplex, SolvesSmallLp) {
  // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
  lp::LinearProgram p(2);
  p.objective = {3, 5};
  p.add({1, 0}, lp::Sense::LessEqual, 4);
  p.add({0, 2}, lp::Sense::LessEqual, 12);
  p.add({3, 2}, lp::Sense::LessEqual, 18);
  const auto s = lp::solve(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.objective, 36.0, 1e-10);
  EXPECT_NEAR(s.x[0], 2.0, 1e-10);
  EXPECT_NEAR(s.x[1], 6.0, 1e-10);
}

TEST(Simplex, EqualityAndGreaterRows) {
  // max x + y, x + y = 1, x >= 0.25, y >= 0.5
  lp::LinearProgram p(2);
  p.objective = {1, 1};
  p.add({1, 1}, lp::Sense::Equal, 1);
  p.add({1, 0}, lp::Sense::GreaterEqual, 0.25);
  p.add({0, 1}, lp::Sense::GreaterEqual, 0.5);
  const auto s = lp::solve(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.objective, 1.0, 1e-12);
  EXPECT_GE(s.x[0], 0.25 - 1e-12);
  EXPECT_GE(s.x[1], 0.5 - 1e-12);
}

TEST(Simplex, ReportsInfeasibleAndUnbounded) {
  lp::LinearProgram inf(1);
  inf.objective = {1};
  inf.add({1}, lp::Sense::LessEqual, 1);
  inf.add({1}, lp::Sense::GreaterEqual, 2);
  EXPECT_EQ(lp::solve(inf).status, lp::Status::Infeasible);

  lp::LinearProgram unb(2);
  unb.objective = {1, 0};
  unb.add({0, 1}, lp::Sense::LessEqual, 1);
  EXPECT_EQ(lp::solve(unb).status, lp::Status::Unbounded);
}

TEST(Simplex, DegenerateLpTerminates) {
  // Klee-Minty style cube, n = 6.
  const int n = 6;
  lp::LinearProgram p(n);
  p.objective.assign(n, 0.0);
  for (int j = 0; j < n; ++j) p.objective[j] = std::pow(2.0, n - 1 - j);
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(n, 0.0);
    for (int j = 0; j < i; ++j) row[j] = std::pow(2.0, i - j + 1);
    row[i] = 1.0;
    p.add(row, lp::Sense::LessEqual, std::pow(5.0, i + 1));
  }
  const auto s = lp::solve(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.objective, std::pow(5.0, n), 1e-6);
}
