#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>

namespace bsepace::detail {

/// Neumaier variant of compensated summation.
class KahanSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  KahanSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Counter-based generator: every (seed, counter, stream) triple maps to an
/// independent 64-bit word, so any round can be regenerated without replaying
/// the ones before it.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t bits(std::uint64_t counter, std::uint64_t stream) const noexcept {
    std::uint64_t z = mix(seed_ ^ 0x9E3779B97F4A7C15ULL);
    z = mix(z + counter * 0xD1B54A32D192ED03ULL);
    z = mix(z + stream * 0x8CB92BA72F3D8DD7ULL + 0x632BE59BD9B4E019ULL);
    return z;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter, std::uint64_t stream) const noexcept {
    return static_cast<double>(bits(counter, stream) >> 11) * 0x1.0p-53;
  }

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

struct ScalarMin {
  double x;
  double fx;
};

/// Golden-section search for the minimum of a unimodal function on [lo, hi].
inline ScalarMin golden_minimize(const std::function<double(double)>& f, double lo, double hi,
                                 double xtol, int max_iter = 200) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > xtol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  ScalarMin best{c, fc};
  if (fd < best.fx) best = {d, fd};
  const double fa = f(lo), fb = f(hi);
  if (fa < best.fx) best = {lo, fa};
  if (fb < best.fx) best = {hi, fb};
  return best;
}

inline ScalarMin golden_maximize(const std::function<double(double)>& f, double lo, double hi,
                                 double xtol, int max_iter = 200) {
  auto r = golden_minimize([&](double x) { return -f(x); }, lo, hi, xtol, max_iter);
  return {r.x, -r.fx};
}

inline bool approx_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace bsepace::detail
