/// @file
/// @brief Penalty method for budget-constrained, q-entropy regularized optimal
/// transport.
///
/// The problem min G(T) over Pi(a, b) intersected with the budget set is split
/// into T (row sums a), U (column sums b), V (row budget) and W (column
/// budget). Each outer iteration k minimizes
///   J_sigma(T, U, V, W) = G(T) + sigma/2 (|T-U|^2 + |T-V|^2 + |T-W|^2)
/// by alternating a projected-gradient step on T (Armijo step size) with exact
/// projections for U, V and W, then grows sigma by theta. The outer loop stops
/// once sqrt(|T-U|^2 + |T-V|^2 + |T-W|^2) <= outer_tol.
#pragma once

#include <chrono>
#include <functional>
#include <optional>

#include "scotm/feasibility.hpp"
#include "scotm/objective.hpp"
#include "scotm/projections.hpp"
#include "scotm/support.hpp"

namespace scotm {

struct ArmijoResult {
  double eta = 0.0;
  Matrix next;
  double value = 0.0; ///< J at `next`
  bool accepted = false;
  int trials = 0;
};

/// Backtracking along the projected path T(eta) = proj_rows(T - eta D).
///
/// Accepts the first eta in {init_step * shrink^j : j < max_backtracks} with
///   J(T(eta)) <= J(T) - c1 |T - T(eta)|^2 / eta.
/// When no trial passes, `next` is T itself and `accepted` is false.
template <typename JEval>
ArmijoResult armijo_search(JEval &&J_eval, const Matrix &T, const Matrix &D,
                           std::span<const double> a, const ArmijoParams &params,
                           std::optional<double> J_at_T = std::nullopt) {
  require_same_shape(T, D, "armijo_search");
  if (a.size() != T.rows())
    throw Error(ErrorCode::DimensionMismatch, "armijo_search: len(a) != rows");
  const double J0 = J_at_T ? *J_at_T : J_eval(T);
  if (!std::isfinite(J0))
    throw Error(ErrorCode::NonFiniteObjective, "objective not finite at T");
  // Rounding in the projection can nudge J upward by a few ulps even for a
  // zero step.
  const double noise = 1e-14 * (1.0 + std::abs(J0));

  Matrix trial(T.rows(), T.cols());
  Matrix shifted(T.rows(), T.cols());
  std::vector<double> scratch;
  auto t = T.flat(), d = D.flat();
  auto s = shifted.flat();

  ArmijoResult r;
  double eta = params.init_step;
  for (int j = 0; j < params.max_backtracks; ++j, eta *= params.shrink) {
    for (std::size_t k = 0; k < t.size(); ++k)
      s[k] = t[k] - eta * d[k];
    detail::project_rows_into(shifted, a, trial, scratch);
    const double Jt = J_eval(trial);
    r.trials = j + 1;
    r.eta = eta;
    if (!std::isfinite(Jt))
      continue;
    if (Jt <= J0 - params.c1 * squared_distance(T, trial) / eta + noise) {
      r.next = std::move(trial);
      r.value = Jt;
      r.accepted = true;
      return r;
    }
  }
  r.next = T;
  r.value = J0;
  return r;
}

/// Snapshot passed to solver observers after every inner iteration.
struct InnerStep {
  int outer = 0;
  int inner = 0;
  double sigma = 0.0;
  double J_before = 0.0;
  double J_after = 0.0;
  double step_norm = 0.0;
  double eta = 0.0;
  const SplitState *state = nullptr;
};

using InnerObserver = std::function<void(const InnerStep &)>;

struct InnerResult {
  SplitState state;
  int iters = 0;
  bool hit_max = false;
  double J_value = 0.0;
};

namespace detail {

// |T-U|^2 + |T-V|^2 + |T-W|^2
inline double split_gap(const Matrix &T, const Matrix &U, const Matrix &V,
                        const Matrix &W) {
  auto t = T.flat(), u = U.flat(), v = V.flat(), w = W.flat();
  double pen = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double du = t[k] - u[k], dv = t[k] - v[k], dw = t[k] - w[k];
    pen += du * du + dv * dv + dw * dw;
  }
  return pen;
}

inline void penalty_gradient_from_slope(const Matrix &C, const SplitState &s,
                                        double gamma, double sigma,
                                        const std::vector<double> &slope,
                                        Matrix &D) {
  auto c = C.flat(), t = s.T.flat(), u = s.U.flat(), v = s.V.flat(),
       w = s.W.flat();
  auto d = D.flat();
  for (std::size_t k = 0; k < c.size(); ++k)
    d[k] = c[k] - gamma * slope[k] + sigma * (3.0 * t[k] - u[k] - v[k] - w[k]);
}

} // namespace detail

/// Updates U, V and W as the exact minimizers of J for the current T.
inline void update_uvw(SplitState &s, std::span<const double> b,
                       const BudgetSpec &budget) {
  thread_local std::vector<double> col, res, scratch;
  if (!s.U.same_shape(s.T))
    s.U = Matrix(s.T.rows(), s.T.cols());
  detail::project_cols_into(s.T, b, s.U, col, res, scratch);
  s.V = s.T;
  for (std::size_t i = 0; i < s.V.rows(); ++i)
    detail::keep_top(s.V.row(i), budget.rho_s, scratch);
  s.W = s.T;
  detail::keep_top_cols(s.W, budget.rho_t, col, scratch);
}

/// Alternates T (Armijo projected gradient) and U/V/W (projections) until
/// |T_new - T_prev|_F <= eps_k or max_inner iterations.
inline InnerResult inner_loop(const Matrix &C, SplitState state,
                              const Marginals &ab, const BudgetSpec &budget,
                              const ObjectiveParams &p, double sigma,
                              double eps_k, int max_inner,
                              const ArmijoParams &armijo = {},
                              const InnerObserver &observer = {},
                              int outer_index = 0) {
  require_same_shape(C, state.T, "inner_loop");
  InnerResult out;
  const double half_sigma = 0.5 * sigma;
  // G and dH/dT of the most recent evaluation; Armijo returns on the first
  // accepted trial, so after a successful search they belong to T_next.
  std::vector<double> slope, slope_T;
  double G_T = detail::objective_G_with_slope(C, state.T, p.gamma, p.q, slope_T);
  double J = G_T + half_sigma * detail::split_gap(state.T, state.U, state.V, state.W);
  ArmijoParams local = armijo;
  Matrix D(C.rows(), C.cols());
  for (int l = 0; l < max_inner; ++l) {
    detail::penalty_gradient_from_slope(C, state, p.gamma, sigma, slope_T, D);
    double G_last = 0.0;
    auto J_of_T = [&](const Matrix &X) {
      G_last = detail::objective_G_with_slope(C, X, p.gamma, p.q, slope);
      return G_last + half_sigma * detail::split_gap(X, state.U, state.V, state.W);
    };
    ArmijoResult step = armijo_search(J_of_T, state.T, D, ab.a(), local, J);
    if (!step.accepted)
      local.init_step = armijo.init_step;
    else if (step.trials == 1)
      local.init_step = std::min(armijo.init_step, step.eta / armijo.shrink);
    else
      local.init_step = step.eta;
    const double moved = frobenius_distance(step.next, state.T);
    state.T = std::move(step.next);
    if (step.accepted) {
      G_T = G_last;
      std::swap(slope_T, slope);
    }
    update_uvw(state, ab.b(), budget);
    const double J_new =
        G_T + half_sigma * detail::split_gap(state.T, state.U, state.V, state.W);
    out.iters = l + 1;
    if (observer)
      observer({outer_index, l, sigma, J, J_new, moved, step.eta, &state});
    J = J_new;
    if (!(moved > eps_k))
      break;
    if (l + 1 == max_inner)
      out.hit_max = true;
  }
  out.J_value = J;
  out.state = std::move(state);
  return out;
}

namespace detail {

// Projects the masked entries of each row of X onto the scaled simplex of
// mass[i]; entries outside the mask are set to zero.
inline void project_rows_on_support(Matrix &X, const std::vector<char> &mask,
                                    std::span<const double> mass) {
  std::vector<double> vals, out, scratch;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    vals.clear();
    where.clear();
    auto r = X.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (mask[i * r.size() + j]) {
        vals.push_back(r[j]);
        where.push_back(j);
      }
      r[j] = 0.0;
    }
    if (vals.empty() || !(mass[i] > 0.0))
      continue;
    out.resize(vals.size());
    scratch.resize(vals.size());
    project_simplex_into(vals, mass[i], out, scratch);
    for (std::size_t k = 0; k < where.size(); ++k)
      r[where[k]] = out[k];
  }
}

inline std::vector<char> transpose_mask(const std::vector<char> &mask,
                                        std::size_t rows, std::size_t cols) {
  std::vector<char> t(mask.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      t[j * rows + i] = mask[i * cols + j];
  return t;
}

} // namespace detail

/// Alternating row/column scaled-simplex projections restricted to `mask`.
/// Each round projects columns first and rows second, so the result has
/// exact row sums. Stops early once both marginals match to 1e-15.
inline Matrix alternate_on_support(Matrix X, const std::vector<char> &mask,
                                   const Marginals &ab, int rounds) {
  const auto maskT = detail::transpose_mask(mask, X.rows(), X.cols());
  for (int r = 0; r < rounds; ++r) {
    Matrix Xt = X.transposed();
    detail::project_rows_on_support(Xt, maskT, ab.b());
    X = Xt.transposed();
    detail::project_rows_on_support(X, mask, ab.a());
    if (max_abs_deviation(col_sums(X), ab.b()) <= 1e-15)
      break;
  }
  return X;
}

/// Euclidean projection of Y onto {X >= 0 supported on `mask`, row sums a,
/// column sums b} by Dykstra's alternating projections (plain alternation
/// only finds some point of the intersection, not the nearest one). Stops
/// when a round moves the iterate by at most 1e-15.
inline Matrix dykstra_on_support(const Matrix &Y, const std::vector<char> &mask,
                                 const Marginals &ab, int rounds) {
  const std::size_t m = Y.rows(), n = Y.cols();
  const auto maskT = detail::transpose_mask(mask, m, n);
  Matrix x = Y, P(m, n), Q(m, n);
  for (int r = 0; r < rounds; ++r) {
    Matrix y = x;
    auto yf = y.flat();
    auto pf = P.flat();
    for (std::size_t k = 0; k < yf.size(); ++k)
      yf[k] += pf[k];
    Matrix yr = y;
    detail::project_rows_on_support(yr, mask, ab.a());
    {
      auto yrf = yr.flat();
      for (std::size_t k = 0; k < yf.size(); ++k)
        pf[k] = yf[k] - yrf[k];
    }
    Matrix z = yr;
    auto zf = z.flat();
    auto qf = Q.flat();
    for (std::size_t k = 0; k < zf.size(); ++k)
      zf[k] += qf[k];
    Matrix zt = z.transposed();
    detail::project_rows_on_support(zt, maskT, ab.b());
    Matrix xn = zt.transposed();
    auto xnf = xn.flat();
    for (std::size_t k = 0; k < zf.size(); ++k)
      qf[k] = zf[k] - xnf[k];
    const double moved = frobenius_distance(xn, x);
    x = std::move(xn);
    if (moved <= 1e-15)
      break;
  }
  return x;
}

inline double marginal_violation(const Matrix &X, const Marginals &ab) {
  return std::max(max_abs_deviation(row_sums(X), ab.a()),
                  max_abs_deviation(col_sums(X), ab.b()));
}

inline constexpr int kSupportRounds = 50;
inline constexpr int kStationarityRounds = 5000;

/// Support-restricted first-order residual
///   |T - P(T - s grad G(T))|_F / s,
/// where P is the Euclidean projection onto plans in Pi(a, b) supported on
/// the support of T, computed by Dykstra's method. Near zero at a point that
/// is stationary on its own support.
inline double stationarity_residual(const Matrix &C, const Matrix &T_hat,
                                    const Marginals &ab, const BudgetSpec &budget,
                                    const ObjectiveParams &p, double probe_step,
                                    double zero_tol = 1e-9,
                                    int rounds = kStationarityRounds) {
  require_same_shape(C, T_hat, "stationarity_residual");
  if (T_hat.rows() != ab.m() || T_hat.cols() != ab.n())
    throw Error(ErrorCode::DimensionMismatch, "stationarity_residual marginals");
  if (!(probe_step > 0.0))
    throw Error(ErrorCode::InvalidConfig, "probe_step must be positive");
  for (std::size_t i = 0; i < T_hat.rows(); ++i)
    if (row_nnz(T_hat, i, zero_tol) > budget.rho_s)
      throw Error(ErrorCode::SupportBudgetViolated,
                  "row " + std::to_string(i) + " exceeds rho_s");
  for (std::size_t j = 0; j < T_hat.cols(); ++j)
    if (col_nnz(T_hat, j, zero_tol) > budget.rho_t)
      throw Error(ErrorCode::SupportBudgetViolated,
                  "column " + std::to_string(j) + " exceeds rho_t");

  std::vector<char> mask(T_hat.size());
  auto t = T_hat.flat();
  for (std::size_t k = 0; k < t.size(); ++k)
    mask[k] = t[k] > zero_tol;

  const Matrix g = objective_gradient(C, T_hat, p);
  Matrix y = T_hat;
  auto yf = y.flat();
  auto gf = g.flat();
  for (std::size_t k = 0; k < yf.size(); ++k)
    yf[k] = mask[k] ? yf[k] - probe_step * gf[k] : 0.0;
  const Matrix projected = dykstra_on_support(y, mask, ab, rounds);
  return frobenius_distance(T_hat, projected) / probe_step;
}

/// Observer hooks for a full solve.
struct SolveObserver {
  InnerObserver on_inner;
  std::function<void(int outer, const OuterRecord &)> on_outer;
};

/// Initial plan for the penalty method: the northwest-corner fill. When the
/// sufficient conditions fail the fill is still attempted and accepted if it
/// respects both budgets, since that alone proves the feasible set non-empty.
inline TransportPlan initial_plan(const Marginals &ab, const BudgetSpec &budget) {
  const auto cond = check_nonemptiness(ab, budget);
  try {
    return northwest_init(ab, budget);
  } catch (const Error &e) {
    if (e.code() != ErrorCode::InitInfeasible)
      throw;
    std::string msg = "no feasible starting plan: ";
    if (!cond.row_ok)
      msg += "row capacity condition fails, |a|_inf=" + std::to_string(cond.a_max) +
             " > sum of rho_s-1 smallest b=" + std::to_string(cond.row_bound) +
             "; ";
    if (!cond.col_ok)
      msg += "column capacity condition fails, |b|_inf=" + std::to_string(cond.b_max) +
             " > sum of rho_t-1 smallest a=" + std::to_string(cond.col_bound) +
             "; ";
    msg += e.what();
    throw Error(ErrorCode::InfeasibleInstance, msg);
  }
}

/// Zeroes T outside the common support of V and W and restores the marginals
/// on that support.
inline Matrix snap_to_budget_support(const SplitState &s, const Marginals &ab,
                                     int rounds = kSupportRounds) {
  std::vector<char> mask(s.T.size());
  auto v = s.V.flat(), w = s.W.flat();
  for (std::size_t k = 0; k < mask.size(); ++k)
    mask[k] = v[k] > 0.0 && w[k] > 0.0;
  Matrix X = s.T;
  auto x = X.flat();
  for (std::size_t k = 0; k < x.size(); ++k)
    if (!mask[k])
      x[k] = 0.0;
  return alternate_on_support(std::move(X), mask, ab, rounds);
}

inline constexpr double kIncumbentTol = 1e-10;

/// Runs the penalty method from the northwest-corner start.
inline SolverReport solve(const CostMatrix &cost, const Marginals &ab,
                          const BudgetSpec &budget, const SolverConfig &cfg,
                          const SolveObserver &observer = {}) {
  const auto started = std::chrono::steady_clock::now();
  cfg.check();
  const ValidatedInstance inst = validate_instance(cost, ab, budget);
  const Matrix &C = inst.cost().values();
  const ObjectiveParams p{cfg.gamma, cfg.q};

  const TransportPlan T0 = initial_plan(ab, budget);
  const double G0 = objective_G(C, T0.values(), p);
  // Restart point for the warm-start test: the feasible plan with the lowest
  // G seen so far, starting from T0. Any such plan has G <= G(T0).
  Matrix incumbent = T0.values();
  double incumbent_G = G0;

  SolverReport report;
  SplitState state = SplitState::replicate(incumbent);
  double sigma = cfg.sigma0;
  for (int k = 0; k < cfg.max_outer; ++k) {
    // Warm-start test: keep the current iterates only if one projected
    // gradient step from them already beats the initial objective.
    const Matrix D = penalty_gradient_T(C, state, p, sigma);
    auto J_of_T = [&](const Matrix &X) {
      return penalty_J(C, X, state.U, state.V, state.W, p, sigma);
    };
    const ArmijoResult trial = armijo_search(J_of_T, state.T, D, ab.a(), cfg.armijo);
    const bool keep = trial.value <= G0;
    if (!keep)
      state = SplitState::replicate(incumbent);

    InnerResult inner =
        inner_loop(C, std::move(state), ab, budget, p, sigma, cfg.eps_at(k),
                   cfg.max_inner, cfg.armijo, observer.on_inner, k);
    state = std::move(inner.state);

    OuterRecord rec;
    rec.sigma = sigma;
    rec.inner_iters = inner.iters;
    rec.J_value = inner.J_value;
    rec.residual = state.residual();
    rec.warm_start_kept = keep;
    rec.hit_max_inner = inner.hit_max;
    report.per_outer.push_back(rec);
    report.total_inner_iters += inner.iters;
    report.max_inner_hit = report.max_inner_hit || inner.hit_max;
    report.outer_iters = k + 1;
    if (observer.on_outer)
      observer.on_outer(k, rec);

    Matrix snapped = snap_to_budget_support(state, ab);
    if (marginal_violation(snapped, ab) <= kIncumbentTol) {
      const double Gs = objective_G(C, snapped, p);
      if (Gs < incumbent_G) {
        incumbent_G = Gs;
        incumbent = std::move(snapped);
      }
    }

    sigma *= cfg.theta;
    if (rec.residual <= cfg.outer_tol) {
      report.converged = true;
      break;
    }
  }

  report.residual = state.residual();
  Matrix snapped = snap_to_budget_support(state, ab);
  report.snap_distance = frobenius_distance(snapped, state.T);
  report.objective_G_snapped = objective_G(C, snapped, p);
  if (cfg.polish) {
    const Mask mask = extend_to_budget(support_of(snapped, 0.0), C, budget);
    if (mask_carries_marginals(mask, ab)) {
      SupportSolve pol = minimize_on_support(C, ab, p, mask, cfg.polish_iters);
      Matrix cleaned =
          alternate_on_support(std::move(pol.plan), mask, ab, kSupportRounds);
      // The polished plan is the exact minimizer over feasible plans on the
      // support, grown to a maximal budget-feasible mask. G is not compared:
      // the snapped plan may only look better by violating the marginals
      // slightly.
      if (pol.converged && marginal_violation(cleaned, ab) <=
                               std::max(marginal_violation(snapped, ab),
                                        kIncumbentTol)) {
        snapped = std::move(cleaned);
        report.polished = true;
      }
    }
  }
  report.max_marginal_violation = marginal_violation(snapped, ab);
  report.objective_G = objective_G(C, snapped, p);
  report.stationarity =
      stationarity_residual(C, snapped, ab, budget, p, 1e-3, cfg.zero_tol);
  report.final_plan = TransportPlan(std::move(snapped));
  report.wall_time = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - started)
                         .count();
  return report;
}

inline SolverReport solve(const ValidatedInstance &inst, const SolverConfig &cfg,
                          const SolveObserver &observer = {}) {
  return solve(inst.cost(), inst.marginals(), inst.budget(), cfg, observer);
}

} // namespace scotm
