/// @file
/// @brief Sufficient conditions for a non-empty budgeted transport polytope,
/// guarantees for prioritized points, marginal construction for prioritized
/// matching and a feasible starting plan.
#pragma once

#include <limits>
#include <set>

#include "scotm/core.hpp"

namespace scotm {

inline constexpr double kConditionTol = 1e-12;

namespace detail {

// Sum of the k smallest entries of v (0 for k = 0).
inline double sum_smallest(std::span<const double> v, std::size_t k) {
  Vector s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return std::accumulate(s.begin(), s.begin() + std::min(k, s.size()), 0.0);
}

// Sum of the k largest entries of v.
inline double sum_largest(std::span<const double> v, std::size_t k) {
  Vector s(v.begin(), v.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  return std::accumulate(s.begin(), s.begin() + std::min(k, s.size()), 0.0);
}

inline double max_entry(std::span<const double> v) {
  return *std::max_element(v.begin(), v.end());
}

} // namespace detail

/// The two inequalities guaranteeing a feasible budgeted plan, together with
/// the quantities they compare.
struct NonEmptinessCheck {
  double a_max = 0.0;     ///< |a|_inf
  double row_bound = 0.0; ///< sum of the rho_s - 1 smallest b
  double b_max = 0.0;     ///< |b|_inf
  double col_bound = 0.0; ///< sum of the rho_t - 1 smallest a
  bool row_ok = false;
  bool col_ok = false;

  bool ok() const noexcept { return row_ok && col_ok; }
};

inline NonEmptinessCheck check_nonemptiness(const Marginals &ab,
                                            const BudgetSpec &budget) {
  budget.check(ab.m(), ab.n());
  NonEmptinessCheck c;
  c.a_max = detail::max_entry(ab.a());
  c.b_max = detail::max_entry(ab.b());
  c.row_bound = detail::sum_smallest(ab.b(), budget.rho_s - 1);
  c.col_bound = detail::sum_smallest(ab.a(), budget.rho_t - 1);
  c.row_ok = c.a_max <= c.row_bound + kConditionTol;
  c.col_ok = c.b_max <= c.col_bound + kConditionTol;
  return c;
}

/// True when both sufficient conditions for a non-empty feasible set hold.
/// A false result does not prove infeasibility.
inline bool check_theorem1(const Marginals &ab, const BudgetSpec &budget) {
  return check_nonemptiness(ab, budget).ok();
}

/// Rows (or columns, for the target side) whose mass is inflated so that at
/// least `h` partners are forced.
struct PrioritySpec {
  std::vector<std::size_t> prioritized;
  std::size_t h = 1;
};

struct PriorityCheck {
  double required = 0.0;       ///< sum of the h largest entries on the other side
  double weakest = 0.0;        ///< smallest mass among prioritized points
  std::vector<std::size_t> failing;

  bool ok() const noexcept { return failing.empty(); }
};

namespace detail {

inline PriorityCheck priority_check(std::span<const double> own,
                                    std::span<const double> other,
                                    const PrioritySpec &prio, std::size_t rho,
                                    const char *side) {
  if (prio.h < 1 || prio.h + 1 > rho)
    throw Error(ErrorCode::PriorityHOutOfRange,
                std::string("h=") + std::to_string(prio.h) + " outside [1, " +
                    side + " - 1 = " + std::to_string(rho - 1) + "]");
  PriorityCheck c;
  c.required = sum_largest(other, prio.h);
  c.weakest = std::numeric_limits<double>::infinity();
  for (std::size_t i : prio.prioritized) {
    if (i >= own.size())
      throw Error(ErrorCode::DimensionMismatch, "prioritized index out of range");
    c.weakest = std::min(c.weakest, own[i]);
    if (own[i] + kConditionTol < c.required)
      c.failing.push_back(i);
  }
  return c;
}

} // namespace detail

/// Source-side priority condition: a_i >= sum of the h largest b for every
/// prioritized row i, with h in [1, rho_s - 1].
inline PriorityCheck check_priority_rows(const Marginals &ab,
                                         const BudgetSpec &budget,
                                         const PrioritySpec &prio) {
  budget.check(ab.m(), ab.n());
  return detail::priority_check(ab.a(), ab.b(), prio, budget.rho_s, "rho_s");
}

/// Target-side analogue: b_j >= sum of the h largest a, h in [1, rho_t - 1].
inline PriorityCheck check_priority_cols(const Marginals &ab,
                                         const BudgetSpec &budget,
                                         const PrioritySpec &prio) {
  budget.check(ab.m(), ab.n());
  return detail::priority_check(ab.b(), ab.a(), prio, budget.rho_t, "rho_t");
}

inline bool check_priority_conditions(const Marginals &ab,
                                      const BudgetSpec &budget,
                                      const PrioritySpec &prio) {
  return check_priority_rows(ab, budget, prio).ok();
}

/// Uniform b; prioritized rows get a_i = h/n and the remaining mass is spread
/// evenly over the other rows. Requires n <= m*h. Throws
/// PriorityConstructionInfeasible when the result would not satisfy the
/// non-emptiness and priority conditions.
inline Marginals build_prioritized_marginals(std::size_t m, std::size_t n,
                                             const std::vector<std::size_t> &prioritized,
                                             std::size_t h,
                                             const BudgetSpec &budget) {
  if (m == 0 || n == 0)
    throw Error(ErrorCode::DimensionMismatch, "empty instance");
  budget.check(m, n);
  if (h < 1 || h + 1 > budget.rho_s)
    throw Error(ErrorCode::PriorityHOutOfRange,
                "h=" + std::to_string(h) + " outside [1, rho_s - 1]");
  std::set<std::size_t> prio(prioritized.begin(), prioritized.end());
  for (std::size_t i : prio)
    if (i >= m)
      throw Error(ErrorCode::DimensionMismatch, "prioritized index out of range");
  if (n > m * h)
    throw Error(ErrorCode::PriorityConstructionInfeasible,
                "n=" + std::to_string(n) + " exceeds m*h=" + std::to_string(m * h));

  const double nd = static_cast<double>(n);
  const double hot = static_cast<double>(h) / nd;
  const std::size_t n_prio = prio.size();
  const double rest_mass = 1.0 - static_cast<double>(n_prio) * hot;
  Vector a(m, 0.0);
  if (n_prio == m) {
    if (std::abs(rest_mass) > kMarginalSumTol)
      throw Error(ErrorCode::PriorityConstructionInfeasible,
                  "every row prioritized but m*h/n != 1");
  } else if (!(rest_mass > 0.0)) {
    throw Error(ErrorCode::PriorityConstructionInfeasible,
                "prioritized rows absorb all mass");
  }
  const double cold =
      n_prio == m ? 0.0 : rest_mass / static_cast<double>(m - n_prio);
  for (std::size_t i = 0; i < m; ++i)
    a[i] = prio.count(i) ? hot : cold;

  Marginals ab(std::move(a), Vector(n, 1.0 / nd), /*normalize=*/true);
  const auto ne = check_nonemptiness(ab, budget);
  if (!ne.row_ok || !ne.col_ok)
    throw Error(ErrorCode::PriorityConstructionInfeasible,
                std::string("constructed marginals violate the ") +
                    (ne.row_ok ? "column" : "row") + " non-emptiness condition");
  if (n_prio > 0 &&
      !check_priority_rows(ab, budget, {{prio.begin(), prio.end()}, h}).ok())
    throw Error(ErrorCode::PriorityConstructionInfeasible,
                "constructed marginals violate the priority condition");
  return ab;
}

/// Northwest-corner fill of the transportation table, followed by a check of
/// both budgets. Throws InitInfeasible when the filled plan breaks a budget.
inline TransportPlan northwest_init(const Marginals &ab, const BudgetSpec &budget) {
  const std::size_t m = ab.m(), n = ab.n();
  budget.check(m, n);
  constexpr double kDust = 1e-15;
  Matrix T(m, n);
  Vector ra = ab.a(), rb = ab.b();
  std::size_t i = 0, j = 0;
  while (i < m && j < n) {
    if (ra[i] <= kDust) {
      ++i;
      continue;
    }
    if (rb[j] <= kDust) {
      ++j;
      continue;
    }
    const double x = std::min(ra[i], rb[j]);
    T(i, j) += x;
    ra[i] -= x;
    rb[j] -= x;
    const bool row_done = ra[i] <= kDust;
    const bool col_done = rb[j] <= kDust;
    if (row_done)
      ++i;
    if (col_done)
      ++j;
  }
  // Sub-dust leftovers from rounding are folded into the last filled entry of
  // the row so row sums stay exact.
  for (std::size_t r = 0; r < m; ++r) {
    if (ra[r] == 0.0)
      continue;
    auto row = T.row(r);
    for (std::size_t c = n; c-- > 0;)
      if (row[c] > 0.0) {
        row[c] += ra[r];
        break;
      }
  }
  for (std::size_t r = 0; r < m; ++r)
    if (row_nnz(T, r) > budget.rho_s)
      throw Error(ErrorCode::InitInfeasible,
                  "northwest fill puts " + std::to_string(row_nnz(T, r)) +
                      " entries in row " + std::to_string(r) + " (rho_s=" +
                      std::to_string(budget.rho_s) + ")");
  for (std::size_t c = 0; c < n; ++c)
    if (col_nnz(T, c) > budget.rho_t)
      throw Error(ErrorCode::InitInfeasible,
                  "northwest fill puts " + std::to_string(col_nnz(T, c)) +
                      " entries in column " + std::to_string(c) + " (rho_t=" +
                      std::to_string(budget.rho_t) + ")");
  return TransportPlan(std::move(T));
}

} // namespace scotm
