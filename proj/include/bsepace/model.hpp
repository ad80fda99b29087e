#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bsepace/detail/numeric.hpp"
#include "bsepace/detail/quadrature.hpp"
#include "bsepace/errors.hpp"

namespace bsepace {

enum class AuctionFormat { FirstPrice, SecondPrice };

inline const char* to_string(AuctionFormat f) {
  return f == AuctionFormat::FirstPrice ? "first-price" : "second-price";
}

/// Expected one-round quantities of a fake-value policy. Payments are the
/// λ-free factors; the realized payment is λ times the factor.
struct Triple {
  double U = 0.0;
  double P_O = 0.0;
  double P_L = 0.0;

  Triple& operator+=(const Triple& o) {
    U += o.U;
    P_O += o.P_O;
    P_L += o.P_L;
    return *this;
  }
  friend Triple operator+(Triple a, const Triple& b) { return a += b; }
  friend Triple operator*(double w, const Triple& t) { return {w * t.U, w * t.P_O, w * t.P_L}; }
};

// ---------------------------------------------------------------------------
// One-dimensional laws on [0, 1]

class Marginal {
 public:
  enum class Kind { Uniform, Discrete, PowerHalf, Point };

  static Marginal uniform() { return Marginal(Kind::Uniform); }

  static Marginal point(double v) {
    check_unit(v, "point value");
    Marginal m(Kind::Point);
    m.values_ = {v};
    m.probs_ = {1.0};
    return m;
  }

  static Marginal discrete(std::vector<double> values, std::vector<double> probs) {
    if (values.empty() || values.size() != probs.size()) {
      throw Error(ErrorKind::InvalidDistribution, "discrete marginal needs matching non-empty values/probs");
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    Marginal m(Kind::Discrete);
    double total = 0.0;
    for (auto i : order) {
      check_unit(values[i], "support value");
      if (!(probs[i] >= 0.0)) throw Error(ErrorKind::InvalidDistribution, "negative probability");
      total += probs[i];
      if (probs[i] == 0.0) continue;
      if (!m.values_.empty() && m.values_.back() == values[i]) {
        m.probs_.back() += probs[i];
      } else {
        m.values_.push_back(values[i]);
        m.probs_.push_back(probs[i]);
      }
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw Error(ErrorKind::InvalidDistribution, "probabilities sum to " + std::to_string(total));
    }
    return m;
  }

  /// Learner law of the non-separated counterexample:
  /// F(x) = ½(2x)^δ on [0, ½], ½ on [½, 1), 1 at 1.
  static Marginal power_half(double delta) {
    if (!(delta > 0.0 && delta < 1.0)) {
      throw Error(ErrorKind::InvalidDistribution, "delta must lie in (0, 1)");
    }
    Marginal m(Kind::PowerHalf);
    m.delta_ = delta;
    return m;
  }

  Kind kind() const { return kind_; }
  double delta() const { return delta_; }
  bool is_atomic() const { return kind_ == Kind::Discrete || kind_ == Kind::Point; }
  const std::vector<double>& atoms() const { return values_; }
  const std::vector<double>& atom_probs() const { return probs_; }

  /// Pr(V < h).
  double below_prob(double h) const {
    switch (kind_) {
      case Kind::Uniform: return std::clamp(h, 0.0, 1.0);
      case Kind::PowerHalf:
        if (h <= 0.0) return 0.0;
        if (h <= 0.5) return 0.5 * std::pow(2.0 * h, delta_);
        return h <= 1.0 ? 0.5 : 1.0;
      default: {
        double s = 0.0;
        for (std::size_t i = 0; i < values_.size() && values_[i] < h; ++i) s += probs_[i];
        return s;
      }
    }
  }

  /// E[V · 1{V < h}].
  double below_mean(double h) const {
    switch (kind_) {
      case Kind::Uniform: {
        const double c = std::clamp(h, 0.0, 1.0);
        return 0.5 * c * c;
      }
      case Kind::PowerHalf: {
        if (h <= 0.0) return 0.0;
        const double x = std::min(h, 0.5);
        const double cont = delta_ * std::pow(x, delta_ + 1.0) / (std::pow(2.0, 1.0 - delta_) * (delta_ + 1.0));
        return h <= 1.0 ? cont : cont + 0.5;
      }
      default: {
        double s = 0.0;
        for (std::size_t i = 0; i < values_.size() && values_[i] < h; ++i) s += probs_[i] * values_[i];
        return s;
      }
    }
  }

  double mean() const { return below_mean(2.0); }

  double prob_zero() const {
    if (!is_atomic()) return 0.0;
    return values_.front() == 0.0 ? probs_.front() : 0.0;
  }

  /// Smallest positive support value; 0 when positive values accumulate at 0.
  double min_positive() const {
    if (kind_ != Kind::Discrete && kind_ != Kind::Point) return 0.0;
    for (double v : values_) {
      if (v > 0.0) return v;
    }
    return 0.0;
  }

  double max_value() const {
    if (is_atomic()) return values_.back();
    return 1.0;
  }

  /// Inverse-CDF sample from u in [0, 1).
  double sample(double u) const {
    switch (kind_) {
      case Kind::Uniform: return u;
      case Kind::PowerHalf:
        if (u >= 0.5) return 1.0;
        return 0.5 * std::pow(2.0 * u, 1.0 / delta_);
      default: {
        double c = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i) {
          c += probs_[i];
          if (u < c) return values_[i];
        }
        return values_.back();
      }
    }
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case Kind::Uniform: os << "uniform"; break;
      case Kind::PowerHalf: os << "power-half(" << delta_ << ")"; break;
      case Kind::Point: os << "point(" << values_[0] << ")"; break;
      case Kind::Discrete:
        os << "discrete{";
        for (std::size_t i = 0; i < values_.size(); ++i) os << (i ? ", " : "") << values_[i] << ":" << probs_[i];
        os << "}";
        break;
    }
    return os.str();
  }

 private:
  explicit Marginal(Kind k) : kind_(k) {}

  static void check_unit(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::InvalidDistribution, std::string(what) + " outside [0, 1]");
    }
  }

  Kind kind_;
  double delta_ = 0.0;
  std::vector<double> values_;
  std::vector<double> probs_;
};

/// One-round triple when the optimizer's value is v_O, she declares h, and the
/// learner's value follows `learner`.
inline Triple slice_triple(AuctionFormat fmt, double h, double v_O, const Marginal& learner) {
  const double W = learner.below_prob(h);
  const double M = learner.below_mean(h);
  if (fmt == AuctionFormat::SecondPrice) return {v_O * W, M, h * (1.0 - W)};
  return {v_O * W, h * W, learner.mean() - M};
}

// ---------------------------------------------------------------------------
// Joint laws of (v_L, v_O)

struct JointAtom {
  double v_L;
  double v_O;
  double prob;
};

/// Conditional learner law given one optimizer value.
struct Slice {
  double v_O;
  double prob;
  Marginal learner;
};

class ValueDistribution {
 public:
  enum class Kind { DiscreteJoint, IndependentUniform, ProductOf, DeltaCdfExample };

  static ValueDistribution discrete_joint(std::vector<JointAtom> atoms) {
    if (atoms.empty()) throw Error(ErrorKind::InvalidDistribution, "empty support");
    double total = 0.0;
    for (const auto& a : atoms) {
      if (!(a.v_L >= 0.0 && a.v_L <= 1.0 && a.v_O >= 0.0 && a.v_O <= 1.0)) {
        throw Error(ErrorKind::InvalidDistribution, "joint value outside [0, 1]");
      }
      if (!(a.prob >= 0.0)) throw Error(ErrorKind::InvalidDistribution, "negative probability");
      total += a.prob;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw Error(ErrorKind::InvalidDistribution, "probabilities sum to " + std::to_string(total));
    }
    ValueDistribution d(Kind::DiscreteJoint);
    d.atoms_ = atoms;
    std::vector<double> vo;
    for (const auto& a : atoms) {
      if (a.prob > 0.0) vo.push_back(a.v_O);
    }
    std::sort(vo.begin(), vo.end());
    vo.erase(std::unique(vo.begin(), vo.end()), vo.end());
    for (double v : vo) {
      std::vector<double> vals, probs;
      double p = 0.0;
      for (const auto& a : atoms) {
        if (a.prob > 0.0 && a.v_O == v) {
          vals.push_back(a.v_L);
          probs.push_back(a.prob);
          p += a.prob;
        }
      }
      for (auto& q : probs) q /= p;
      d.slices_.push_back({v, p, conditional(vals, probs)});
    }
    d.finish();
    return d;
  }

  static ValueDistribution independent_uniform() {
    ValueDistribution d(Kind::IndependentUniform);
    d.learner_ = Marginal::uniform();
    d.optimizer_ = Marginal::uniform();
    d.finish();
    return d;
  }

  static ValueDistribution product(Marginal learner, Marginal optimizer) {
    if (optimizer.kind() == Marginal::Kind::PowerHalf) {
      throw Error(ErrorKind::InvalidDistribution, "optimizer marginal must be uniform, point or discrete");
    }
    ValueDistribution d(Kind::ProductOf);
    d.learner_ = learner;
    d.optimizer_ = optimizer;
    if (optimizer.is_atomic()) {
      for (std::size_t i = 0; i < optimizer.atoms().size(); ++i) {
        d.slices_.push_back({optimizer.atoms()[i], optimizer.atom_probs()[i], learner});
      }
    }
    d.finish();
    return d;
  }

  static ValueDistribution delta_cdf_example(double delta) {
    ValueDistribution d(Kind::DeltaCdfExample);
    d.learner_ = Marginal::power_half(delta);
    d.optimizer_ = Marginal::point(1.0);
    d.slices_.push_back({1.0, 1.0, d.learner_});
    d.finish();
    return d;
  }

  Kind kind() const { return kind_; }
  double delta() const { return learner_.delta(); }
  const std::vector<JointAtom>& atoms() const { return atoms_; }
  const Marginal& learner_marginal() const { return learner_; }
  const Marginal& optimizer_marginal() const { return optimizer_; }

  /// True when the optimizer's value takes finitely many values (slices available).
  bool optimizer_discrete() const { return !slices_.empty(); }
  const std::vector<Slice>& slices() const { return slices_; }

  /// True when every conditional learner law is atomic.
  bool learner_discrete() const {
    if (slices_.empty()) return learner_.is_atomic();
    return std::all_of(slices_.begin(), slices_.end(), [](const Slice& s) { return s.learner.is_atomic(); });
  }

  double mean_learner() const { return mean_L_; }
  double mean_optimizer() const { return mean_O_; }
  double epsilon_sep() const { return eps_sep_; }

  /// E[v_O · 1{v_L = 0}]: the value the optimizer collects for free when the
  /// learner's multiplier is unboundedly large and she bids zero.
  double null_value() const { return null_value_; }

  /// Sorted union of learner support points (atomic learner laws only).
  std::vector<double> learner_support() const {
    std::vector<double> out;
    if (slices_.empty()) {
      out = learner_.atoms();
    } else {
      for (const auto& s : slices_) out.insert(out.end(), s.learner.atoms().begin(), s.learner.atoms().end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Maps two uniforms to a draw (v_L, v_O).
  std::pair<double, double> sample(double u1, double u2) const {
    if (kind_ == Kind::DiscreteJoint) {
      double c = 0.0;
      for (const auto& a : atoms_) {
        c += a.prob;
        if (u1 < c) return {a.v_L, a.v_O};
      }
      for (auto it = atoms_.rbegin(); it != atoms_.rend(); ++it) {
        if (it->prob > 0.0) return {it->v_L, it->v_O};
      }
    }
    return {learner_.sample(u1), optimizer_.sample(u2)};
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::DiscreteJoint: return "discrete-joint(" + std::to_string(atoms_.size()) + " atoms)";
      case Kind::IndependentUniform: return "independent-uniform";
      case Kind::ProductOf: return "product(" + learner_.describe() + ", " + optimizer_.describe() + ")";
      case Kind::DeltaCdfExample: return "delta-cdf(" + std::to_string(delta()) + ")";
    }
    return "";
  }

 private:
  explicit ValueDistribution(Kind k) : kind_(k), learner_(Marginal::uniform()), optimizer_(Marginal::uniform()) {}

  static Marginal conditional(const std::vector<double>& vals, std::vector<double> probs) {
    // Renormalized conditionals may miss 1 by a few ulps.
    const double s = std::accumulate(probs.begin(), probs.end(), 0.0);
    for (auto& p : probs) p /= s;
    if (vals.size() == 1) return Marginal::point(vals[0]);
    return Marginal::discrete(vals, probs);
  }

  void finish() {
    if (!slices_.empty()) {
      mean_L_ = mean_O_ = null_value_ = 0.0;
      double max_O = 0.0, min_L = 0.0;
      for (const auto& s : slices_) {
        mean_L_ += s.prob * s.learner.mean();
        mean_O_ += s.prob * s.v_O;
        null_value_ += s.prob * s.v_O * s.learner.prob_zero();
        max_O = std::max(max_O, s.v_O);
        const double mp = s.learner.min_positive();
        if (mp > 0.0 && (min_L == 0.0 || mp < min_L)) min_L = mp;
        if (!s.learner.is_atomic()) min_L = -1.0;
      }
      if (min_L < 0.0) min_L = 0.0;
      if (!learner_discrete()) min_L = 0.0;
      eps_sep_ = (max_O > 0.0) ? min_L / max_O : 0.0;
    } else {
      mean_L_ = learner_.mean();
      mean_O_ = optimizer_.mean();
      null_value_ = learner_.prob_zero() * mean_O_;
      const double mp = learner_.min_positive();
      eps_sep_ = mp > 0.0 ? mp / optimizer_.max_value() : 0.0;
    }
  }

  Kind kind_;
  std::vector<JointAtom> atoms_;
  std::vector<Slice> slices_;
  Marginal learner_;
  Marginal optimizer_;
  double mean_L_ = 0.0, mean_O_ = 0.0, eps_sep_ = 0.0, null_value_ = 0.0;
};

// ---------------------------------------------------------------------------
// Fake-value maps

class BidPolicy {
 public:
  enum class Family { Constant, AffineClipped, PiecewiseConstant, PacingMirror, Zero };
  static constexpr double kDefaultCap = 2.0;

  static BidPolicy constant(double c, double cap = kDefaultCap) {
    BidPolicy p(Family::Constant, cap);
    p.p_ = {c};
    return p;
  }
  /// v ↦ clamp(a·v + b, lo, hi).
  static BidPolicy affine(double a, double b, double lo = 0.0, double hi = kDefaultCap,
                          double cap = kDefaultCap) {
    if (!(lo <= hi)) throw Error(ErrorKind::InvalidArgument, "affine policy needs lo <= hi");
    BidPolicy p(Family::AffineClipped, cap);
    p.p_ = {a, b, lo, hi};
    return p;
  }
  /// values[0] below breaks[0], values[i] on [breaks[i-1], breaks[i]).
  static BidPolicy piecewise(std::vector<double> breaks, std::vector<double> values,
                             double cap = kDefaultCap) {
    if (values.size() != breaks.size() + 1) {
      throw Error(ErrorKind::InvalidArgument, "piecewise policy needs one more value than breakpoints");
    }
    for (std::size_t i = 1; i < breaks.size(); ++i) {
      if (!(breaks[i] > breaks[i - 1])) {
        throw Error(ErrorKind::InvalidArgument, "piecewise breakpoints must increase strictly");
      }
    }
    BidPolicy p(Family::PiecewiseConstant, cap);
    p.breaks_ = std::move(breaks);
    p.p_ = std::move(values);
    return p;
  }
  static BidPolicy mirror(double cap = kDefaultCap) { return BidPolicy(Family::PacingMirror, cap); }
  static BidPolicy zero(double cap = kDefaultCap) { return BidPolicy(Family::Zero, cap); }

  Family family() const { return family_; }
  double cap() const { return cap_; }
  const std::vector<double>& params() const { return p_; }
  const std::vector<double>& breaks() const { return breaks_; }

  double operator()(double v) const {
    double h = 0.0;
    switch (family_) {
      case Family::Constant: h = p_[0]; break;
      case Family::AffineClipped: h = std::clamp(p_[0] * v + p_[1], p_[2], p_[3]); break;
      case Family::PiecewiseConstant: {
        const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), v);
        h = p_[static_cast<std::size_t>(it - breaks_.begin())];
        break;
      }
      case Family::PacingMirror: h = v; break;
      case Family::Zero: h = 0.0; break;
    }
    return std::clamp(h, 0.0, cap_);
  }

  /// Points in (0, 1) where the map has a kink or jump.
  std::vector<double> breakpoints() const {
    std::vector<double> out;
    if (family_ == Family::PiecewiseConstant) out = breaks_;
    if (family_ == Family::AffineClipped && p_[0] != 0.0) {
      for (double level : {p_[2], p_[3], 0.0, cap_}) out.push_back((level - p_[1]) / p_[0]);
    }
    return inside(out);
  }

  /// Points in (0, 1) where the map crosses `level` (used to split
  /// integrals at learner atoms).
  std::vector<double> crossings(double level) const {
    std::vector<double> out;
    if (family_ == Family::AffineClipped && p_[0] != 0.0) out.push_back((level - p_[1]) / p_[0]);
    if (family_ == Family::PacingMirror) out.push_back(level);
    return inside(out);
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(10);
    switch (family_) {
      case Family::Constant: os << "constant(" << p_[0] << ")"; break;
      case Family::AffineClipped:
        os << "affine(" << p_[0] << ", " << p_[1] << ", " << p_[2] << ", " << p_[3] << ")";
        break;
      case Family::PiecewiseConstant:
        os << "piecewise[";
        for (std::size_t i = 0; i < p_.size(); ++i) {
          os << p_[i];
          if (i < breaks_.size()) os << " |" << breaks_[i] << "| ";
        }
        os << "]";
        break;
      case Family::PacingMirror: os << "mirror"; break;
      case Family::Zero: os << "zero"; break;
    }
    return os.str();
  }

 private:
  BidPolicy(Family f, double cap) : family_(f), cap_(cap) {
    if (!(cap > 0.0)) throw Error(ErrorKind::InvalidArgument, "policy cap must be positive");
  }

  static std::vector<double> inside(std::vector<double> v) {
    v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !(x > 0.0 && x < 1.0); }), v.end());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  }

  Family family_;
  double cap_;
  std::vector<double> p_;
  std::vector<double> breaks_;
};

// ---------------------------------------------------------------------------
// One round

enum class Winner { Learner, Optimizer };

struct RoundOutcome {
  Winner winner = Winner::Learner;
  double u_O = 0.0;
  double p_O_scaled = 0.0;
  double p_L_scaled = 0.0;
};

/// Resolves a round given the declared fake value h (bid λ·h against λ·v_L).
/// Ties go to the learner.
inline RoundOutcome resolve_round(AuctionFormat fmt, double h, double lambda, double v_L, double v_O) {
  RoundOutcome r;
  if (h > v_L) {
    r.winner = Winner::Optimizer;
    r.u_O = v_O;
    r.p_O_scaled = lambda * (fmt == AuctionFormat::SecondPrice ? v_L : h);
  } else {
    r.p_L_scaled = lambda * (fmt == AuctionFormat::SecondPrice ? h : v_L);
  }
  return r;
}

inline RoundOutcome round_outcome(AuctionFormat fmt, const BidPolicy& policy, double lambda, double v_L,
                                  double v_O) {
  return resolve_round(fmt, policy(v_O), lambda, v_L, v_O);
}

// ---------------------------------------------------------------------------
// Expectations

inline constexpr double kQuadTol = 1e-9;

/// Triple of a policy when the optimizer's value is uniform on [0, 1] and
/// independent of the learner's.
inline Triple continuous_triple(AuctionFormat fmt, const BidPolicy& policy, const Marginal& learner,
                                double tol = kQuadTol) {
  std::vector<double> breaks = policy.breakpoints();
  if (learner.is_atomic()) {
    for (double a : learner.atoms()) {
      const auto c = policy.crossings(a);
      breaks.insert(breaks.end(), c.begin(), c.end());
    }
  }
  if (learner.kind() == Marginal::Kind::PowerHalf) {
    for (double lv : {0.5, 1.0}) {
      const auto c = policy.crossings(lv);
      breaks.insert(breaks.end(), c.begin(), c.end());
    }
  }
  auto r = detail::integrate<3>(
      [&](double v) {
        const Triple t = slice_triple(fmt, policy(v), v, learner);
        return std::array<double, 3>{t.U, t.P_O, t.P_L};
      },
      0.0, 1.0, tol, breaks);
  return {r.value[0], r.value[1], r.value[2]};
}

inline Triple expected_triple(AuctionFormat fmt, const BidPolicy& policy, const ValueDistribution& dist) {
  if (dist.optimizer_discrete()) {
    Triple t;
    for (const auto& s : dist.slices()) t += s.prob * slice_triple(fmt, policy(s.v_O), s.v_O, s.learner);
    return t;
  }
  return continuous_triple(fmt, policy, dist.learner_marginal());
}

using Mixture = std::vector<std::pair<double, BidPolicy>>;

inline Triple expected_triple_mixed(AuctionFormat fmt, const Mixture& mixture, const ValueDistribution& dist) {
  double total = 0.0;
  Triple t;
  for (const auto& [w, p] : mixture) {
    if (!(w >= 0.0)) throw Error(ErrorKind::InvalidArgument, "negative mixture weight");
    total += w;
    if (w > 0.0) t += w * expected_triple(fmt, p, dist);
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorKind::InvalidArgument, "mixture weights must sum to 1");
  return t;
}

/// Sampling estimate of the triple; validation only.
inline Triple monte_carlo_triple(AuctionFormat fmt, const BidPolicy& policy, const ValueDistribution& dist,
                                 std::uint64_t n, std::uint64_t seed) {
  detail::CounterRng rng(seed);
  detail::KahanSum u, po, pl;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto [vl, vo] = dist.sample(rng.uniform(i, 0), rng.uniform(i, 1));
    const auto r = round_outcome(fmt, policy, 1.0, vl, vo);
    u += r.u_O;
    po += r.p_O_scaled;
    pl += r.p_L_scaled;
  }
  const double k = static_cast<double>(n);
  return {u.value() / k, po.value() / k, pl.value() / k};
}

}  // namespace bsepace
