#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace bsepace::lp {

enum class Sense { LessEqual, GreaterEqual, Equal };

struct Row {
  std::vector<double> coeffs;
  Sense sense;
  double rhs;
};

/// maximize objective·x  subject to rows, x >= 0.
struct LinearProgram {
  std::vector<double> objective;
  std::vector<Row> rows;

  explicit LinearProgram(std::size_t n = 0) : objective(n, 0.0) {}
  std::size_t num_vars() const { return objective.size(); }
  void add(std::vector<double> coeffs, Sense sense, double rhs) {
    rows.push_back({std::move(coeffs), sense, rhs});
  }
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

struct Solution {
  Status status = Status::Infeasible;
  double objective = -std::numeric_limits<double>::infinity();
  std::vector<double> x;

  bool optimal() const { return status == Status::Optimal; }
};

namespace detail {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : m_(rows), n_(cols), data_((rows + 1) * (cols + 1), 0.0), basis_(rows, 0) {}

  double& at(std::size_t r, std::size_t c) { return data_[r * (n_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * (n_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, n_); }
  double& obj(std::size_t c) { return at(m_, c); }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    const double p = at(r, c);
    double* prow = &data_[r * (n_ + 1)];
    for (std::size_t j = 0; j <= n_; ++j) prow[j] /= p;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      double* row = &data_[i * (n_ + 1)];
      const double f = row[c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n_; ++j) row[j] -= f * prow[j];
      row[c] = 0.0;
    }
    basis_[r] = c;
  }

  /// Runs primal simplex on the current objective row. Columns with
  /// `blocked[c]` never enter. Returns Optimal, Unbounded or IterationLimit.
  Status optimize(const std::vector<char>& blocked, double tol, std::size_t max_iter) {
    std::size_t degenerate_streak = 0;
    for (std::size_t it = 0; it < max_iter; ++it) {
      const bool bland = degenerate_streak > 50;
      std::size_t enter = n_;
      double best = tol;
      for (std::size_t c = 0; c < n_; ++c) {
        if (blocked[c]) continue;
        const double d = at(m_, c);
        if (d > tol) {
          if (bland) {
            enter = c;
            break;
          }
          if (d > best) {
            best = d;
            enter = c;
          }
        }
      }
      if (enter == n_) return Status::Optimal;
      std::size_t leave = m_;
      double ratio = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m_; ++r) {
        const double a = at(r, enter);
        if (a > tol) {
          const double q = at(r, n_) / a;
          if (q < ratio - 1e-15 ||
              (q <= ratio + 1e-15 && leave < m_ && basis_[r] < basis_[leave])) {
            ratio = q;
            leave = r;
          }
        }
      }
      if (leave == m_) return Status::Unbounded;
      degenerate_streak = (ratio <= tol) ? degenerate_streak + 1 : 0;
      pivot(leave, enter);
    }
    return Status::IterationLimit;
  }

 private:
  std::size_t m_, n_;
  std::vector<double> data_;
  std::vector<std::size_t> basis_;
};

}  // namespace detail

/// Dense two-phase primal simplex. Intended for the small programs of this
/// library (tens of rows, up to a few thousand columns); returns a basic
/// optimal solution, so at most `rows.size()` variables are nonzero.
inline Solution solve(const LinearProgram& lp, double tol = 1e-10) {
  const std::size_t n = lp.num_vars();
  const std::size_t m = lp.rows.size();
  std::size_t n_slack = 0, n_art = 0;
  for (const auto& row : lp.rows) {
    const bool flip = row.rhs < 0.0;
    Sense s = row.sense;
    if (flip && s != Sense::Equal) s = (s == Sense::LessEqual) ? Sense::GreaterEqual : Sense::LessEqual;
    if (s != Sense::Equal) ++n_slack;
    if (s != Sense::LessEqual) ++n_art;
  }
  const std::size_t cols = n + n_slack + n_art;
  detail::Tableau t(m, cols);
  std::vector<char> is_art(cols, 0);
  std::size_t slack_at = n, art_at = n + n_slack;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = lp.rows[i];
    const bool flip = row.rhs < 0.0;
    const double sign = flip ? -1.0 : 1.0;
    Sense s = row.sense;
    if (flip && s != Sense::Equal) s = (s == Sense::LessEqual) ? Sense::GreaterEqual : Sense::LessEqual;
    for (std::size_t j = 0; j < n && j < row.coeffs.size(); ++j) t.at(i, j) = sign * row.coeffs[j];
    t.rhs(i) = sign * row.rhs;
    if (s == Sense::LessEqual) {
      t.at(i, slack_at) = 1.0;
      t.basis()[i] = slack_at++;
    } else {
      if (s == Sense::GreaterEqual) t.at(i, slack_at++) = -1.0;
      t.at(i, art_at) = 1.0;
      is_art[art_at] = 1;
      t.basis()[i] = art_at++;
    }
  }
  const std::size_t max_iter = 50 * (m + cols) + 1000;
  std::vector<char> blocked(cols, 0);

  // Phase 1: maximize -sum(artificials).
  if (n_art > 0) {
    for (std::size_t c = 0; c <= cols; ++c) t.obj(c) = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (is_art[c]) t.obj(c) = -1.0;
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (!is_art[t.basis()[i]]) continue;
      for (std::size_t c = 0; c <= cols; ++c) t.obj(c) += t.at(i, c);
    }
    const Status s1 = t.optimize(blocked, tol, max_iter);
    if (s1 == Status::IterationLimit) return {Status::IterationLimit, 0.0, {}};
    // obj rhs holds -z; phase-1 optimum z = -sum(art) must be ~0.
    if (t.obj(cols) > 1e-8 * (1.0 + static_cast<double>(m))) return {Status::Infeasible, 0.0, {}};
    for (std::size_t i = 0; i < m; ++i) {
      if (!is_art[t.basis()[i]]) continue;
      for (std::size_t c = 0; c < cols; ++c) {
        if (!is_art[c] && std::abs(t.at(i, c)) > 1e-9) {
          t.pivot(i, c);
          break;
        }
      }
    }
    for (std::size_t c = 0; c < cols; ++c) blocked[c] = is_art[c];
  }

  // Phase 2.
  for (std::size_t c = 0; c <= cols; ++c) t.obj(c) = 0.0;
  for (std::size_t j = 0; j < n; ++j) t.obj(j) = lp.objective[j];
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t b = t.basis()[i];
    const double cb = b < n ? lp.objective[b] : 0.0;
    if (cb == 0.0) continue;
    for (std::size_t c = 0; c <= cols; ++c) t.obj(c) -= cb * t.at(i, c);
  }
  const Status s2 = t.optimize(blocked, tol, max_iter);
  if (s2 != Status::Optimal) return {s2, 0.0, {}};

  Solution sol;
  sol.status = Status::Optimal;
  sol.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t b = t.basis()[i];
    if (b < n) sol.x[b] = std::max(0.0, t.rhs(i));
  }
  double z = 0.0;
  for (std::size_t j = 0; j < n; ++j) z += lp.objective[j] * sol.x[j];
  sol.objective = z;
  return sol;
}

}  // namespace bsepace::lp
