#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "bsepace/bse.hpp"
#include "bsepace/model.hpp"

namespace fixtures {

using namespace bsepace;

inline FiniteGame small_game(double rho) {
  return FiniteGame{{{3, 0}, {0, 1}}, {{3, 0}, {0, 1}}, {Matrix{{3, 0}, {0, 0}}}, {rho}};
}

// v_O = 1; v_L is 1/2 w.p. 1/3 and 1 w.p. 2/3.
inline ValueDistribution two_point() {
  return ValueDistribution::discrete_joint({{0.5, 1.0, 1.0 / 3.0}, {1.0, 1.0, 2.0 / 3.0}});
}

inline AuctionBseProblem problem(ValueDistribution d, double rho_L, double rho_O,
                                 AuctionFormat fmt = AuctionFormat::SecondPrice) {
  return AuctionBseProblem{std::move(d), fmt, rho_L, rho_O, {}, {}, {}};
}

inline ValueDistribution separated_discrete() {
  return ValueDistribution::product(Marginal::discrete({0.0, 0.5, 1.0}, {0.2, 0.4, 0.4}),
                                    Marginal::discrete({0.4, 1.0}, {0.5, 0.5}));
}

struct RandomInstance {
  ValueDistribution dist;
  double rho_L;
  double rho_O;
};

/// Product of discrete marginals whose positive learner values are at least
/// eps times the largest optimizer value.
inline RandomInstance random_separated(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double eps = 0.25 + 0.35 * u(rng);
  const int nl = 2 + static_cast<int>(rng() % 2), no = 1 + static_cast<int>(rng() % 3);
  std::vector<double> vl{0.0}, pl{0.1 + 0.3 * u(rng)};
  for (int i = 0; i < nl; ++i) {
    vl.push_back(eps + (1.0 - eps) * (i + u(rng)) / nl);
    pl.push_back(0.2 + u(rng));
  }
  std::vector<double> vo, po;
  for (int i = 0; i < no; ++i) {
    vo.push_back(0.3 + 0.7 * (i + u(rng)) / no);
    po.push_back(0.2 + u(rng));
  }
  auto norm = [](std::vector<double>& p) {
    double s = 0.0;
    for (double x : p) s += x;
    for (double& x : p) x /= s;
    double t = 0.0;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) t += p[i];
    p.back() = 1.0 - t;
  };
  norm(pl);
  norm(po);
  auto d = ValueDistribution::product(Marginal::discrete(vl, pl), Marginal::discrete(vo, po));
  return {d, 0.15 + 0.25 * u(rng), 0.05 + 0.15 * u(rng)};
}

}  // namespace fixtures
