#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include "bsepace/errors.hpp"

namespace bsepace::detail {

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1] (QUADPACK qk15).
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N>
struct QuadResult {
  std::array<double, N> value{};
  double error = 0.0;
  std::size_t intervals = 0;
};

template <std::size_t N>
struct QuadPiece {
  double a, b;
  std::array<double, N> value;
  double error;
  bool operator<(const QuadPiece& o) const { return error < o.error; }
};

template <std::size_t N, class F>
QuadPiece<N> gk15(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  std::array<double, N> kron{}, gauss{};
  const std::array<double, N> fc = f(center);
  for (std::size_t k = 0; k < N; ++k) {
    kron[k] = fc[k] * kWgk[7];
    gauss[k] = fc[k] * kWg[3];
  }
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const std::array<double, N> f1 = f(center - dx);
    const std::array<double, N> f2 = f(center + dx);
    for (std::size_t k = 0; k < N; ++k) {
      kron[k] += kWgk[j] * (f1[k] + f2[k]);
      // Gauss nodes are the odd-indexed Kronrod nodes.
      if (j % 2 == 1) gauss[k] += kWg[j / 2] * (f1[k] + f2[k]);
    }
  }
  QuadPiece<N> piece{a, b, {}, 0.0};
  for (std::size_t k = 0; k < N; ++k) {
    piece.value[k] = kron[k] * half;
    piece.error = std::max(piece.error, std::abs((kron[k] - gauss[k]) * half));
  }
  return piece;
}

/// Globally adaptive GK15 integration of a vector-valued integrand over [a, b].
/// `breaks` are interior points where the integrand may be non-smooth; they
/// seed the initial partition. Throws QuadratureNonConvergence when the
/// absolute tolerance is not met within `max_intervals` pieces.
template <std::size_t N, class F>
QuadResult<N> integrate(const F& f, double a, double b, double abs_tol,
                        std::vector<double> breaks = {}, std::size_t max_intervals = 4000) {
  QuadResult<N> out;
  if (!(b > a)) return out;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  std::priority_queue<QuadPiece<N>> heap;
  std::array<double, N> total{};
  double total_err = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(a, breaks[i]);
    const double hi = std::min(b, breaks[i + 1]);
    if (!(hi > lo)) continue;
    auto p = gk15<N>(f, lo, hi);
    for (std::size_t k = 0; k < N; ++k) total[k] += p.value[k];
    total_err += p.error;
    heap.push(p);
  }
  while (total_err > abs_tol) {
    if (heap.size() >= max_intervals) {
      throw Error(ErrorKind::QuadratureNonConvergence,
                  "error estimate " + std::to_string(total_err) + " above tolerance " +
                      std::to_string(abs_tol));
    }
    auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // Interval cannot be split further in floating point; accept it.
      total_err -= worst.error;
      worst.error = 0.0;
      heap.push(worst);
      continue;
    }
    auto left = gk15<N>(f, worst.a, mid);
    auto right = gk15<N>(f, mid, worst.b);
    for (std::size_t k = 0; k < N; ++k) {
      total[k] += left.value[k] + right.value[k] - worst.value[k];
    }
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum from the pieces to shed accumulated update round-off.
  std::array<double, N> clean{};
  double err = 0.0;
  out.intervals = heap.size();
  while (!heap.empty()) {
    const auto& p = heap.top();
    for (std::size_t k = 0; k < N; ++k) clean[k] += p.value[k];
    err += p.error;
    heap.pop();
  }
  out.value = clean;
  out.error = err;
  return out;
}

template <class F>
double integrate_scalar(const F& f, double a, double b, double abs_tol,
                        std::vector<double> breaks = {}) {
  auto r = integrate<1>([&](double x) { return std::array<double, 1>{f(x)}; }, a, b, abs_tol,
                        std::move(breaks));
  return r.value[0];
}

}  // namespace bsepace::detail
