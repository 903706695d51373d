/// @file
#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace scotm;
using scotm::testing::max_abs_diff;
using scotm::testing::uniform;

TEST(Armijo, ZeroDirectionKeepsPoint) {
  const Matrix T{{0.3, 0.7}};
  auto J = [](const Matrix &X) { return X(0, 0) * X(0, 0) + X(0, 1); };
  const auto r = armijo_search(J, T, Matrix(1, 2), Vector{1.0}, ArmijoParams{});
  EXPECT_TRUE(r.accepted);
  EXPECT_EQ(r.trials, 1);
  EXPECT_LT(max_abs_diff(r.next, T), 1e-15);
}

TEST(Armijo, FullStepOnQuadratic) {
  const Matrix target{{0.9, 0.1}};
  auto J = [&](const Matrix &X) { return 0.5 * squared_distance(X, target); };
  const Matrix T{{0.5, 0.5}};
  const Matrix D{{0.5 - 0.9, 0.5 - 0.1}};
  EXPECT_NEAR(J(T), 0.16, 1e-15);
  const auto r = armijo_search(J, T, D, Vector{1.0}, ArmijoParams{});
  EXPECT_TRUE(r.accepted);
  EXPECT_EQ(r.eta, 1.0);
  EXPECT_LT(max_abs_diff(r.next, target), 1e-15);
  EXPECT_LT(r.value, 1e-30);
}

TEST(Armijo, StallSignal) {
  // J grows along every projected trial point.
  const Matrix T{{1.0, 0.0}};
  auto J = [](const Matrix &X) { return X(0, 1); };
  const Matrix D{{1.0, -1.0}};
  ArmijoParams params;
  params.max_backtracks = 10;
  const auto r = armijo_search(J, T, D, Vector{1.0}, params);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.trials, 10);
  EXPECT_EQ(r.next, T);
}

TEST(Armijo, NonFiniteStart) {
  auto J = [](const Matrix &) { return std::nan(""); };
  EXPECT_THROW(armijo_search(J, Matrix{{1.0}}, Matrix{{0.0}}, Vector{1.0}, ArmijoParams{}),
               Error);
}

namespace {

struct Uniform2x2 {
  Matrix C{{0.0, 1.0}, {1.0, 0.0}};
  Marginals ab{uniform(2), uniform(2)};
  BudgetSpec budget{2, 2};
  ObjectiveParams p{0.1, 0.5};
};

} // namespace

TEST(InnerLoop, FixedPointStopsAfterOneIteration) {
  // Constant cost: the uniform plan is the unconstrained optimum and all
  // projections leave it in place.
  Uniform2x2 u;
  const Matrix C(2, 2, 0.3);
  const auto r = inner_loop(C, SplitState::replicate(Matrix(2, 2, 0.25)), u.ab, u.budget,
                            u.p, 10.0, 1e-12, 100);
  EXPECT_EQ(r.iters, 1);
}

TEST(InnerLoop, MonotoneJ) {
  Uniform2x2 u;
  std::vector<double> before, after;
  InnerObserver obs = [&](const InnerStep &s) {
    before.push_back(s.J_before);
    after.push_back(s.J_after);
  };
  // The uniform plan is far from every budget-1 support, so the split has work to do.
  // U, V, W start at their projections, as they do inside solve.
  SplitState s0 = SplitState::replicate(Matrix(2, 2, 0.25));
  update_uvw(s0, u.ab.b(), {1, 1});
  const auto r = inner_loop(u.C, s0, u.ab, {1, 1}, u.p, 10.0, 1e-10, 1000, ArmijoParams{}, obs);
  ASSERT_GT(r.iters, 1);
  for (std::size_t k = 0; k < after.size(); ++k) {
    EXPECT_LE(after[k], before[k] + 1e-10);
    if (k) {
      EXPECT_EQ(before[k], after[k - 1]);
    }
  }
}

TEST(InnerLoop, InfiniteToleranceRunsOnce) {
  Uniform2x2 u;
  const auto r = inner_loop(u.C, SplitState::replicate(Matrix(2, 2, 0.25)), u.ab, u.budget,
                            u.p, 10.0, std::numeric_limits<double>::infinity(), 100);
  EXPECT_EQ(r.iters, 1);
}

TEST(Solve, SingletonInstance) {
  const auto r = solve(CostMatrix(Matrix{{0.7}}), Marginals({1.0}, {1.0}), {1, 1},
                       SolverConfig{});
  EXPECT_EQ(r.final_plan.values(), (Matrix{{1.0}}));
  EXPECT_EQ(r.residual, 0.0);
  EXPECT_TRUE(r.converged);
}

TEST(Solve, PermutationCostAtBudgetOne) {
  SolverConfig cfg;
  cfg.q = 0.9;
  cfg.gamma = 0.01;
  const Matrix C{{0, 1}, {1, 0}};
  const Marginals ab(uniform(2), uniform(2));
  const auto oracle = global_oracle(C, ab, {1, 1}, {cfg.gamma, cfg.q});
  EXPECT_LT(max_abs_diff(oracle.plan.values(), Matrix{{0.5, 0}, {0, 0.5}}), 1e-12);
  const auto r = solve(CostMatrix(C), ab, {1, 1}, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(max_abs_diff(r.final_plan.values(), oracle.plan.values()), 1e-4);
}

TEST(Solve, EntropyDominatedConstantCostIsUniform) {
  SolverConfig cfg;
  cfg.gamma = 10.0;
  const Marginals ab(uniform(2), uniform(2));
  const auto r = solve(CostMatrix(Matrix(2, 2, 0.8)), ab, {2, 2}, cfg);
  EXPECT_LT(max_abs_diff(r.final_plan.values(), Matrix(2, 2, 0.25)), 1e-3);
}

// With C = [[0,1],[1,0]] the optimum is not uniform to 1e-3 even at gamma = 10
// (the linear term still tilts it by about 0.014); the solver must match the
// oracle instead.
TEST(Solve, EntropyDominatedMatchesOracle) {
  SolverConfig cfg;
  cfg.gamma = 10.0;
  const Matrix C{{0, 1}, {1, 0}};
  const Marginals ab(uniform(2), uniform(2));
  const auto oracle = global_oracle(C, ab, {2, 2}, {cfg.gamma, cfg.q});
  const auto r = solve(CostMatrix(C), ab, {2, 2}, cfg);
  EXPECT_LT(max_abs_diff(r.final_plan.values(), oracle.plan.values()), 1e-6);
  EXPECT_GT(max_abs_diff(oracle.plan.values(), Matrix(2, 2, 0.25)), 1e-3);
}

TEST(Solve, InfeasibleBudgetReported) {
  try {
    solve(CostMatrix(Matrix(2, 3, 1.0)), Marginals(uniform(2), uniform(3)), {1, 2},
          SolverConfig{});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleInstance);
    EXPECT_NE(std::string(e.what()).find("row capacity condition"), std::string::npos);
  }
}

TEST(Solve, RhoOneAcceptedWhenFillFits) {
  // The sufficient conditions fail at rho = 1, but the northwest fill is a
  // permutation and proves feasibility.
  const Marginals ab(uniform(3), uniform(3));
  EXPECT_FALSE(check_theorem1(ab, {1, 1}));
  std::mt19937_64 g(3);
  const auto r = solve(CostMatrix(scotm::testing::random_matrix(3, 3, g)), ab, {1, 1},
                       SolverConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(nnz(r.final_plan.values(), 1e-9), 3u);
}

TEST(Solve, IterateInvariantsAndBudgets) {
  std::mt19937_64 g(31);
  const std::size_t m = 6, n = 7;
  const Matrix C = scotm::testing::random_matrix(m, n, g);
  const Marginals ab(scotm::testing::random_simplex(m, g, 0.3),
                     scotm::testing::random_simplex(n, g, 0.3));
  const BudgetSpec budget{3, 3};
  SolverConfig cfg;
  SolveObserver obs;
  int steps = 0;
  obs.on_inner = [&](const InnerStep &s) {
    ++steps;
    EXPECT_LE(s.J_after, s.J_before + 1e-10);
    EXPECT_NO_THROW(s.state->check(ab, budget));
  };
  const auto r = solve(CostMatrix(C), ab, budget, cfg, obs);
  EXPECT_GT(steps, 0);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.residual, cfg.outer_tol);
  const Matrix &T = r.final_plan.values();
  for (std::size_t i = 0; i < m; ++i)
    EXPECT_LE(row_nnz(T, i, cfg.zero_tol), budget.rho_s);
  for (std::size_t j = 0; j < n; ++j)
    EXPECT_LE(col_nnz(T, j, cfg.zero_tol), budget.rho_t);
  EXPECT_LE(r.max_marginal_violation, 1e-10);
}

TEST(Solve, Deterministic) {
  std::mt19937_64 g(8);
  const Matrix C = scotm::testing::random_matrix(5, 5, g);
  const Marginals ab(uniform(5), uniform(5));
  const auto r1 = solve(CostMatrix(C), ab, {2, 2}, SolverConfig{});
  const auto r2 = solve(CostMatrix(C), ab, {2, 2}, SolverConfig{});
  EXPECT_EQ(r1.final_plan, r2.final_plan);
  EXPECT_EQ(r1.total_inner_iters, r2.total_inner_iters);
  EXPECT_EQ(r1.objective_G, r2.objective_G);
}

TEST(Stationarity, SingletonIsZero) {
  EXPECT_EQ(stationarity_residual(Matrix{{0.4}}, Matrix{{1.0}}, Marginals({1.0}, {1.0}),
                                  {1, 1}, {0.1, 0.5}, 1e-3),
            0.0);
}

TEST(Stationarity, OracleOptimumVersusPerturbed) {
  std::mt19937_64 g(14);
  const Matrix C = scotm::testing::random_matrix(3, 3, g);
  const Marginals ab(uniform(3), uniform(3));
  const ObjectiveParams p{0.1, 0.5};
  const auto oracle = global_oracle(C, ab, {1, 1}, p);
  EXPECT_LT(stationarity_residual(C, oracle.plan.values(), ab, {1, 1}, p, 1e-3), 1e-6);
  Matrix off = oracle.plan.values();
  std::size_t first = 0;
  while (off.flat()[first] == 0.0)
    ++first;
  off.flat()[first] += 0.01;
  EXPECT_GT(stationarity_residual(C, off, ab, {1, 1}, p, 1e-3), 1e-3);

  // The optimum under a looser budget is stationary on its own support.
  const auto dense = global_oracle(C, ab, {2, 2}, p);
  EXPECT_LT(stationarity_residual(C, dense.plan.values(), ab, {2, 2}, p, 1e-3), 1e-6);
}

TEST(Stationarity, BudgetViolationRejected) {
  EXPECT_THROW(stationarity_residual(Matrix(2, 2, 0.0), Matrix(2, 2, 0.25),
                                     Marginals(uniform(2), uniform(2)), {1, 1},
                                     {0.1, 0.5}, 1e-3),
               Error);
}

TEST(SnapToBudget, ZeroesOutsideCommonSupport) {
  const Marginals ab(uniform(2), uniform(2));
  SplitState s = SplitState::replicate(Matrix{{0.45, 0.05}, {0.05, 0.45}});
  s.V = Matrix{{0.45, 0}, {0, 0.45}};
  s.W = s.V;
  const Matrix snapped = snap_to_budget_support(s, ab);
  EXPECT_LT(max_abs_diff(snapped, Matrix{{0.5, 0}, {0, 0.5}}), 1e-15);
}
