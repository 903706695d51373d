/// @file
/// @brief Transport problems on a fixed support pattern: exact feasibility by
/// min-cost flow and the minimizer of G over plans living on the pattern.
#pragma once

#include <limits>
#include <random>

#include "scotm/objective.hpp"

namespace scotm {

using Mask = std::vector<char>; ///< row-major m x n 0/1 pattern

inline Mask support_of(const Matrix &X, double zero_tol) {
  Mask mask(X.size());
  auto x = X.flat();
  for (std::size_t k = 0; k < x.size(); ++k)
    mask[k] = x[k] > zero_tol;
  return mask;
}

struct FlowResult {
  Matrix plan;
  double shipped = 0.0;
};

/// Min-cost flow by successive shortest paths (Bellman-Ford) on
/// source -> rows (capacity a) -> masked cells (cost C) -> columns
/// (capacity b) -> sink. With a zero cost matrix this is a max-flow test.
inline FlowResult min_cost_flow(const Matrix &C, const Marginals &ab,
                                const Mask &mask) {
  const std::size_t m = ab.m(), n = ab.n();
  if (C.rows() != m || C.cols() != n || mask.size() != m * n)
    throw Error(ErrorCode::DimensionMismatch, "min_cost_flow shapes");
  const std::size_t S = m + n, Tn = m + n + 1, N = m + n + 2;
  struct Edge {
    std::size_t to;
    double cap, cost;
    std::size_t rev;
  };
  std::vector<std::vector<Edge>> g(N);
  auto add = [&](std::size_t u, std::size_t v, double cap, double cost) {
    g[u].push_back({v, cap, cost, g[v].size()});
    g[v].push_back({u, 0.0, -cost, g[u].size() - 1});
  };
  constexpr double kInnerCap = 2.0; // exceeds any mass
  for (std::size_t i = 0; i < m; ++i)
    add(S, i, ab.a()[i], 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (mask[i * n + j])
        add(i, m + j, kInnerCap, C(i, j));
  for (std::size_t j = 0; j < n; ++j)
    add(m + j, Tn, ab.b()[j], 0.0);

  constexpr double kCapTol = 1e-15;
  FlowResult r{Matrix(m, n), 0.0};
  for (;;) {
    std::vector<double> dist(N, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> pv(N, N), pe(N, 0);
    dist[S] = 0.0;
    for (std::size_t it = 0; it + 1 < N; ++it) {
      bool changed = false;
      for (std::size_t u = 0; u < N; ++u) {
        if (!std::isfinite(dist[u]))
          continue;
        for (std::size_t e = 0; e < g[u].size(); ++e) {
          const Edge &ed = g[u][e];
          if (ed.cap > kCapTol && dist[u] + ed.cost < dist[ed.to] - 1e-15) {
            dist[ed.to] = dist[u] + ed.cost;
            pv[ed.to] = u;
            pe[ed.to] = e;
            changed = true;
          }
        }
      }
      if (!changed)
        break;
    }
    if (!std::isfinite(dist[Tn]))
      break;
    double push = std::numeric_limits<double>::infinity();
    for (std::size_t v = Tn; v != S; v = pv[v])
      push = std::min(push, g[pv[v]][pe[v]].cap);
    for (std::size_t v = Tn; v != S; v = pv[v]) {
      Edge &ed = g[pv[v]][pe[v]];
      ed.cap -= push;
      g[v][ed.rev].cap += push;
    }
    r.shipped += push;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (const Edge &ed : g[i])
      if (ed.to >= m && ed.to < m + n)
        r.plan(i, ed.to - m) = std::max(0.0, kInnerCap - ed.cap);
  return r;
}

/// Exact test (Hall's condition via max flow) that some plan in Pi(a, b) is
/// supported on `mask`.
inline bool mask_carries_marginals(const Mask &mask, const Marginals &ab) {
  return min_cost_flow(Matrix(ab.m(), ab.n()), ab, mask).shipped > 1.0 - 1e-12;
}

/// The entries of `mask` that are positive in at least one plan of Pi(a, b)
/// supported on `mask`. Starting from one feasible flow, a zero entry (i, j)
/// can be raised exactly when the residual network has a path from column j
/// back to row i. Requires mask_carries_marginals(mask, ab).
inline Mask essential_mask(const Mask &mask, const Marginals &ab) {
  const std::size_t m = ab.m(), n = ab.n();
  const Matrix flow = min_cost_flow(Matrix(m, n), ab, mask).plan;
  constexpr double kPositive = 1e-14;
  // Nodes 0..m-1 are rows, m..m+n-1 columns. Residual arcs: row -> column for
  // every masked cell, column -> row where the flow is positive.
  const std::size_t N = m + n;
  std::vector<std::vector<char>> reach(N, std::vector<char>(N, 0));
  for (std::size_t src = 0; src < N; ++src) {
    std::vector<std::size_t> stack{src};
    reach[src][src] = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      auto visit = [&](std::size_t v) {
        if (!reach[src][v]) {
          reach[src][v] = 1;
          stack.push_back(v);
        }
      };
      if (u < m) {
        for (std::size_t j = 0; j < n; ++j)
          if (mask[u * n + j])
            visit(m + j);
      } else {
        for (std::size_t i = 0; i < m; ++i)
          if (flow(i, u - m) > kPositive)
            visit(i);
      }
    }
  }
  Mask out(mask.size(), 0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (mask[i * n + j])
        out[i * n + j] = flow(i, j) > kPositive || reach[m + j][i];
  return out;
}

/// Adds cells to `mask`, cheapest first (ties by index), while the row and
/// column counts stay within the budgets. The result is maximal: no further
/// cell can be added without breaking a budget.
inline Mask extend_to_budget(Mask mask, const Matrix &C, const BudgetSpec &budget) {
  const std::size_t m = C.rows(), n = C.cols();
  if (mask.size() != m * n)
    throw Error(ErrorCode::DimensionMismatch, "extend_to_budget shapes");
  std::vector<std::size_t> rc(m, 0), cc(n, 0), order;
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (mask[k]) {
      ++rc[k / n];
      ++cc[k % n];
    } else {
      order.push_back(k);
    }
  }
  auto c = C.flat();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return c[l] < c[r]; });
  for (std::size_t k : order) {
    const std::size_t i = k / n, j = k % n;
    if (rc[i] < budget.rho_s && cc[j] < budget.rho_t) {
      mask[k] = 1;
      ++rc[i];
      ++cc[j];
    }
  }
  return mask;
}

namespace detail {

// Minimizer over t >= 0 of C t - gamma h(t) - s t, and its derivative in s.
inline double dual_entry(double s, double c, const ObjectiveParams &p) {
  const double base = 1.0 + (1.0 - p.q) * (s - c) / p.gamma;
  if (base <= 0.0)
    return 0.0;
  return p.q == 0.0 ? base : std::pow(base, 1.0 / (1.0 - p.q));
}

inline double dual_entry_slope(double s, double c, const ObjectiveParams &p) {
  const double base = 1.0 + (1.0 - p.q) * (s - c) / p.gamma;
  if (base <= 0.0)
    return 0.0;
  return (p.q == 0.0 ? 1.0 : std::pow(base, p.q / (1.0 - p.q))) / p.gamma;
}

// Solves A x = b in place by Gaussian elimination with partial pivoting.
inline Vector solve_dense(std::vector<double> A, Vector b) {
  const std::size_t N = b.size();
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < N; ++r)
      if (std::abs(A[r * N + col]) > std::abs(A[piv * N + col]))
        piv = r;
    if (piv != col) {
      for (std::size_t k = 0; k < N; ++k)
        std::swap(A[col * N + k], A[piv * N + k]);
      std::swap(b[col], b[piv]);
    }
    const double d = A[col * N + col];
    for (std::size_t r = col + 1; r < N; ++r) {
      const double f = A[r * N + col] / d;
      if (f == 0.0)
        continue;
      for (std::size_t k = col; k < N; ++k)
        A[r * N + k] -= f * A[col * N + k];
      b[r] -= f * b[col];
    }
  }
  Vector x(N);
  for (std::size_t r = N; r-- > 0;) {
    double acc = b[r];
    for (std::size_t k = r + 1; k < N; ++k)
      acc -= A[r * N + k] * x[k];
    x[r] = acc / A[r * N + r];
  }
  return x;
}

} // namespace detail

struct SupportSolve {
  Matrix plan;
  int iters = 0;
  bool converged = false;
};

/// Minimizes G over plans in Pi(a, b) that vanish outside `mask` (gamma > 0;
/// the problem is then strictly convex) through its concave dual
///   D(alpha, beta) = <alpha, a> + <beta, b>
///                    + sum_mask min_t (C t - gamma h(t) - (alpha_i + beta_j) t),
/// whose inner minimizer is
///   t_ij = [1 + (1-q)(alpha_i + beta_j - C_ij)/gamma]_+^(1/(1-q)).
/// D is maximized by a regularized semismooth Newton method with backtracking.
/// Stops once both marginals match to `tol`. A non-zero `seed` draws the
/// starting duals at random. The mask must carry the marginals (see
/// mask_carries_marginals); entries that vanish in every such plan are dropped
/// first so that the dual optimum is finite.
inline SupportSolve minimize_on_support(const Matrix &C, const Marginals &ab,
                                        const ObjectiveParams &p, const Mask &full_mask,
                                        int max_iters, double tol = 1e-14,
                                        std::uint64_t seed = 0) {
  p.check();
  if (!(p.gamma > 0.0))
    throw Error(ErrorCode::InvalidConfig, "minimize_on_support needs gamma > 0");
  const std::size_t m = ab.m(), n = ab.n();
  if (C.rows() != m || C.cols() != n || full_mask.size() != m * n)
    throw Error(ErrorCode::DimensionMismatch, "minimize_on_support shapes");
  const Mask mask = essential_mask(full_mask, ab);

  // Rows and columns without mass carry nothing and are left out.
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < m; ++i)
    if (ab.a()[i] > 0.0)
      rows.push_back(i);
  for (std::size_t j = 0; j < n; ++j)
    if (ab.b()[j] > 0.0)
      cols.push_back(j);
  const std::size_t R = rows.size(), K = rows.size() + cols.size();

  Vector x(K, 0.0);
  if (seed != 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-p.gamma, p.gamma);
    for (double &v : x)
      v = U(rng);
  }

  auto entry_value = [&](double s, double c) {
    const double t = detail::dual_entry(s, c, p);
    return c * t - p.gamma * detail::entropy_term(t, p.q) - s * t;
  };
  auto dual_value = [&](const Vector &y) {
    double v = 0.0;
    for (std::size_t r = 0; r < R; ++r)
      v += y[r] * ab.a()[rows[r]];
    for (std::size_t c = 0; c < cols.size(); ++c)
      v += y[R + c] * ab.b()[cols[c]];
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < cols.size(); ++c)
        if (mask[rows[r] * n + cols[c]])
          v += entry_value(y[r] + y[R + c], C(rows[r], cols[c]));
    return v;
  };
  // Ascent direction of D and the negated generalized Hessian.
  auto gradient = [&](const Vector &y, std::vector<double> *M) {
    Vector g(K);
    for (std::size_t r = 0; r < R; ++r)
      g[r] = ab.a()[rows[r]];
    for (std::size_t c = 0; c < cols.size(); ++c)
      g[R + c] = ab.b()[cols[c]];
    if (M)
      M->assign(K * K, 0.0);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if (!mask[rows[r] * n + cols[c]])
          continue;
        const double s = y[r] + y[R + c], cost = C(rows[r], cols[c]);
        const double t = detail::dual_entry(s, cost, p);
        g[r] -= t;
        g[R + c] -= t;
        if (M) {
          const double d = detail::dual_entry_slope(s, cost, p);
          (*M)[r * K + r] += d;
          (*M)[(R + c) * K + (R + c)] += d;
          (*M)[r * K + R + c] += d;
          (*M)[(R + c) * K + r] += d;
        }
      }
    return g;
  };
  auto inf_norm = [](const Vector &v) {
    double s = 0.0;
    for (double e : v)
      s = std::max(s, std::abs(e));
    return s;
  };

  SupportSolve out;
  std::vector<double> M;
  Vector g = gradient(x, &M);
  double gnorm = inf_norm(g);
  double D = dual_value(x);
  for (int it = 0; it < max_iters && gnorm > tol; ++it) {
    out.iters = it + 1;
    // Levenberg-style shift: keeps the system regular (the duals have a
    // gauge freedom and clipped entries drop out of M) and damps far steps.
    const double lambda = std::max(gnorm, 1e-14);
    for (std::size_t k = 0; k < K; ++k)
      M[k * K + k] += lambda;
    const Vector d = detail::solve_dense(M, g);
    double slope = 0.0;
    for (std::size_t k = 0; k < K; ++k)
      slope += g[k] * d[k];

    bool moved = false;
    for (double tau = 1.0; tau > 1e-12; tau *= 0.5) {
      Vector y = x;
      for (std::size_t k = 0; k < K; ++k)
        y[k] += tau * d[k];
      const double Dy = dual_value(y);
      Vector gy = gradient(y, nullptr);
      const double gy_norm = inf_norm(gy);
      // Near the optimum D is flat to rounding, so a clear drop in the
      // marginal error also counts as progress.
      if (Dy >= D + 1e-4 * tau * slope || gy_norm <= 0.5 * gnorm) {
        x = std::move(y);
        D = Dy;
        moved = true;
        break;
      }
    }
    if (!moved)
      break;
    g = gradient(x, &M);
    gnorm = inf_norm(g);
  }
  out.converged = gnorm <= std::max(tol, 1e-12);

  out.plan = Matrix(m, n);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (mask[rows[r] * n + cols[c]])
        out.plan(rows[r], cols[c]) =
            detail::dual_entry(x[r] + x[R + c], C(rows[r], cols[c]), p);
  return out;
}

} // namespace scotm
