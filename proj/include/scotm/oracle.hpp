/// @file
/// @brief Brute-force reference computations for tiny instances: support
/// enumeration, the optimum of G on a fixed support, the global optimum over
/// all budget-feasible supports, and finite-difference gradients.
#pragma once

#include <functional>
#include <random>

#include "scotm/objective.hpp"
#include "scotm/solver.hpp"
#include "scotm/support.hpp"

namespace scotm {

inline constexpr std::size_t kMaxEnumeratedMasks = 1'000'000;
inline constexpr int kMaskFeasibilityRounds = 200;
inline constexpr double kMaskFeasibilityTol = 1e-8;
inline constexpr int kOracleIters = 2000;

namespace detail {

inline std::size_t mask_count(std::size_t cells) {
  if (cells >= 63 || (std::size_t{1} << cells) > kMaxEnumeratedMasks)
    throw Error(ErrorCode::CombinatorialBlowup,
                "2^" + std::to_string(cells) + " candidate masks exceed " +
                    std::to_string(kMaxEnumeratedMasks));
  return std::size_t{1} << cells;
}

inline Mask bits_to_mask(std::size_t bits, std::size_t cells) {
  Mask m(cells);
  for (std::size_t k = 0; k < cells; ++k)
    m[k] = static_cast<char>((bits >> k) & 1u);
  return m;
}

inline bool within_budget(const Mask &mask, std::size_t m, std::size_t n,
                          const BudgetSpec &budget) {
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j)
      c += mask[i * n + j] != 0;
    if (c > budget.rho_s)
      return false;
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < m; ++i)
      c += mask[i * n + j] != 0;
    if (c > budget.rho_t)
      return false;
  }
  return true;
}

} // namespace detail

/// True when some plan in Pi(a, b) is supported on `mask`, tested by
/// alternating row/column projections restricted to the mask.
inline bool mask_supports_marginals(const Mask &mask, const Marginals &ab,
                                    int rounds = kMaskFeasibilityRounds,
                                    double tol = kMaskFeasibilityTol) {
  const std::size_t m = ab.m(), n = ab.n();
  if (mask.size() != m * n)
    throw Error(ErrorCode::DimensionMismatch, "mask size");
  Matrix X(m, n);
  auto x = X.flat();
  for (std::size_t k = 0; k < x.size(); ++k)
    x[k] = mask[k] ? 1.0 : 0.0;
  X = alternate_on_support(std::move(X), mask, ab, rounds);
  for (std::size_t i = 0; i < m; ++i)
    if (ab.a()[i] > 0.0 && row_nnz(X, i, 0.0) == 0)
      return false;
  return marginal_violation(X, ab) < tol;
}

/// All masks with at most rho_s ones per row and rho_t per column that carry
/// some element of Pi(a, b), in increasing order of their bit pattern
/// (bit k is cell k in row-major order).
inline std::vector<Mask> enumerate_feasible_supports(std::size_t m, std::size_t n,
                                                     const BudgetSpec &budget,
                                                     const Marginals &ab) {
  if (ab.m() != m || ab.n() != n)
    throw Error(ErrorCode::DimensionMismatch, "marginals do not match m x n");
  budget.check(m, n);
  const std::size_t cells = m * n;
  const std::size_t total = detail::mask_count(cells);
  std::vector<Mask> out;
  for (std::size_t bits = 1; bits < total; ++bits) {
    Mask mask = detail::bits_to_mask(bits, cells);
    if (detail::within_budget(mask, m, n, budget) &&
        mask_supports_marginals(mask, ab))
      out.push_back(std::move(mask));
  }
  return out;
}

struct OracleResult {
  TransportPlan plan;
  double G = 0.0;
  Mask mask;
};

/// Minimizes G over plans in Pi(a, b) supported on `mask`. For gamma > 0 the
/// restricted problem is strictly convex and is solved by exact dual block
/// coordinate ascent (minimize_on_support); `seed` randomizes the dual start.
/// For gamma = 0 it is a linear program, solved as a min-cost flow.
inline OracleResult restricted_solve(const Matrix &C, const Marginals &ab,
                                     const ObjectiveParams &p, const Mask &mask,
                                     std::uint64_t seed = 0) {
  p.check();
  const std::size_t m = ab.m(), n = ab.n();
  if (C.rows() != m || C.cols() != n || mask.size() != m * n)
    throw Error(ErrorCode::DimensionMismatch, "restricted_solve shapes");
  if (!mask_carries_marginals(mask, ab))
    throw Error(ErrorCode::RestrictedInfeasible,
                "mask cannot carry the marginals");

  OracleResult r;
  r.mask = mask;
  Matrix plan;
  if (p.gamma == 0.0) {
    plan = min_cost_flow(C, ab, mask).plan;
  } else {
    SupportSolve s = minimize_on_support(C, ab, p, mask, kOracleIters, 1e-14, seed);
    plan = alternate_on_support(std::move(s.plan), mask, ab, kSupportRounds);
  }
  r.G = objective_G(C, plan, p);
  r.plan = TransportPlan(std::move(plan));
  return r;
}

/// Global minimum of G over Pi(a, b) intersected with the budget set, by
/// restricted solves over every feasible support. Only masks that are
/// maximal under the budgets are solved: any feasible mask lies inside a
/// maximal one, which is feasible too and can only do better. Ties keep the
/// lexicographically first mask.
inline OracleResult global_oracle(const Matrix &C, const Marginals &ab,
                                  const BudgetSpec &budget,
                                  const ObjectiveParams &p) {
  const std::size_t m = ab.m(), n = ab.n();
  if (C.rows() != m || C.cols() != n)
    throw Error(ErrorCode::DimensionMismatch, "global_oracle shapes");
  budget.check(m, n);
  const std::size_t cells = m * n;
  const std::size_t total = detail::mask_count(cells);

  auto is_maximal = [&](const Mask &mask) {
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (mask[k])
        continue;
      Mask bigger = mask;
      bigger[k] = 1;
      if (detail::within_budget(bigger, m, n, budget))
        return false;
    }
    return true;
  };

  std::optional<OracleResult> best;
  for (std::size_t bits = 1; bits < total; ++bits) {
    const Mask mask = detail::bits_to_mask(bits, cells);
    if (!detail::within_budget(mask, m, n, budget) || !is_maximal(mask) ||
        !mask_supports_marginals(mask, ab))
      continue;
    OracleResult r = restricted_solve(C, ab, p, mask);
    if (!best || r.G < best->G)
      best = std::move(r);
  }
  if (!best)
    throw Error(ErrorCode::InfeasibleInstance, "no budget-feasible support");
  return std::move(*best);
}

struct FiniteDiffResult {
  Matrix grad;
  Mask one_sided; ///< entries where a forward difference was used
  bool any_one_sided = false;
};

/// Central differences (f(X + hE) - f(X - hE)) / 2h per entry. Entries with
/// X < h would leave the domain on the minus side and use the forward
/// difference (f(X + hE) - f(X)) / h instead; those entries are flagged.
inline FiniteDiffResult finite_diff_gradient(const std::function<double(const Matrix &)> &f,
                                             const Matrix &X, double h) {
  if (!(h > 0.0))
    throw Error(ErrorCode::InvalidConfig, "finite difference step must be positive");
  FiniteDiffResult r{Matrix(X.rows(), X.cols()), Mask(X.size(), 0), false};
  const double f0 = f(X);
  if (!std::isfinite(f0))
    throw Error(ErrorCode::NonFiniteObjective, "f(X) not finite");
  Matrix Y = X;
  auto y = Y.flat();
  auto x = X.flat();
  auto g = r.grad.flat();
  for (std::size_t k = 0; k < y.size(); ++k) {
    y[k] = x[k] + h;
    const double fp = f(Y);
    double fm = f0, denom = h;
    if (x[k] >= h) {
      y[k] = x[k] - h;
      fm = f(Y);
      denom = 2.0 * h;
    } else {
      r.one_sided[k] = 1;
      r.any_one_sided = true;
    }
    y[k] = x[k];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw Error(ErrorCode::NonFiniteObjective,
                  "f not finite near entry " + std::to_string(k));
    g[k] = (fp - fm) / denom;
  }
  return r;
}

} // namespace scotm
