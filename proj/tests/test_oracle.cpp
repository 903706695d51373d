/// @file
#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace scotm;
using scotm::testing::max_abs_diff;
using scotm::testing::uniform;

TEST(EnumerateSupports, Examples) {
  const Marginals ab(uniform(2), uniform(2));
  const auto perms = enumerate_feasible_supports(2, 2, {1, 1}, ab);
  ASSERT_EQ(perms.size(), 2u);
  EXPECT_EQ(perms[0], (Mask{0, 1, 1, 0}));
  EXPECT_EQ(perms[1], (Mask{1, 0, 0, 1}));

  const auto all = enumerate_feasible_supports(2, 2, {2, 2}, ab);
  EXPECT_EQ(all.size(), 7u);
  EXPECT_NE(std::find(all.begin(), all.end(), Mask{1, 1, 1, 1}), all.end());

  const Marginals ab3(uniform(2), uniform(3));
  const auto wide = enumerate_feasible_supports(2, 3, {3, 2}, ab3);
  EXPECT_NE(std::find(wide.begin(), wide.end(), Mask(6, 1)), wide.end());
}

TEST(EnumerateSupports, Guard) {
  const Marginals ab(uniform(5), uniform(5));
  try {
    enumerate_feasible_supports(5, 5, {2, 2}, ab);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::CombinatorialBlowup);
  }
}

// Mask feasibility by alternating projections against the exact max-flow test.
TEST(MaskFeasibility, ProjectionAgreesWithFlow) {
  std::mt19937_64 g(77);
  int feasible = 0, infeasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + g() % 4, n = 1 + g() % 4;
    const Marginals ab(scotm::testing::random_simplex(m, g, 1.0),
                       scotm::testing::random_simplex(n, g, 1.0));
    Mask mask(m * n);
    for (char &c : mask)
      c = (g() % 3) != 0;
    const bool flow = mask_carries_marginals(mask, ab);
    EXPECT_EQ(mask_supports_marginals(mask, ab), flow) << "trial " << trial;
    (flow ? feasible : infeasible)++;
  }
  EXPECT_GT(feasible, 20);
  EXPECT_GT(infeasible, 20);
}

TEST(RestrictedSolve, Examples) {
  const ObjectiveParams p{0.3, 0.5};
  const auto one = restricted_solve(Matrix{{0.7}}, Marginals({1.0}, {1.0}), p, Mask{1});
  EXPECT_EQ(one.plan.values(), (Matrix{{1.0}}));
  EXPECT_NEAR(one.G, 0.7 - 0.3 * deformed_q_entropy(Matrix{{1.0}}, 0.5), 1e-15);

  const Marginals ab(uniform(2), uniform(2));
  const auto diag = restricted_solve(Matrix{{0, 1}, {1, 0}}, ab, p, Mask{1, 0, 0, 1});
  EXPECT_LT(max_abs_diff(diag.plan.values(), Matrix{{0.5, 0}, {0, 0.5}}), 1e-15);

  const auto full = restricted_solve(Matrix(2, 2), ab, {1.0, 0.0}, Mask(4, 1));
  EXPECT_LT(max_abs_diff(full.plan.values(), Matrix(2, 2, 0.25)), 1e-12);
  // Grid over the one-parameter family [[t, .5-t], [.5-t, t]].
  double best = 1e300, arg = -1;
  for (int k = 0; k <= 500; ++k) {
    const double t = k * 1e-3;
    const double G = objective_G(Matrix(2, 2), Matrix{{t, 0.5 - t}, {0.5 - t, t}}, {1.0, 0.0});
    if (G < best) {
      best = G;
      arg = t;
    }
  }
  EXPECT_NEAR(arg, 0.25, 1e-3);
  EXPECT_LE(full.G, best + 1e-12);
}

TEST(RestrictedSolve, InfeasibleMask) {
  const Marginals ab(uniform(2), uniform(2));
  try {
    restricted_solve(Matrix(2, 2), ab, {0.1, 0.5}, Mask{1, 1, 0, 0});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::RestrictedInfeasible);
  }
}

TEST(RestrictedSolve, RandomStartsAgree) {
  std::mt19937_64 g(123);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 2 + g() % 3, n = 2 + g() % 3;
    const Matrix C = scotm::testing::random_matrix(m, n, g);
    const Marginals ab(scotm::testing::random_simplex(m, g), scotm::testing::random_simplex(n, g));
    Mask mask(m * n, 1);
    for (char &c : mask)
      c = (g() % 4) != 0;
    if (!mask_carries_marginals(mask, ab))
      continue;
    const ObjectiveParams p{trial % 2 ? 0.01 : 0.1, (trial % 3) * 0.45};
    const double G0 = restricted_solve(C, ab, p, mask).G;
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
      EXPECT_NEAR(restricted_solve(C, ab, p, mask, seed).G, G0, 1e-8) << "trial " << trial;
  }
}

// The restricted optimum is stationary on its own support.
TEST(RestrictedSolve, FirstOrderConditions) {
  std::mt19937_64 g(5);
  const Matrix C = scotm::testing::random_matrix(3, 4, g);
  const Marginals ab(uniform(3), uniform(4));
  const ObjectiveParams p{0.1, 0.9};
  const auto r = restricted_solve(C, ab, p, Mask(12, 1));
  EXPECT_LT(stationarity_residual(C, r.plan.values(), ab, {4, 3}, p, 1e-3), 1e-6);
  EXPECT_LE(marginal_violation(r.plan.values(), ab), 1e-12);
}

TEST(GlobalOracle, Examples) {
  const Marginals ab(uniform(2), uniform(2));
  const auto diag = global_oracle(Matrix{{0, 1}, {1, 0}}, ab, {1, 1}, {0.01, 0.9});
  EXPECT_EQ(diag.mask, (Mask{1, 0, 0, 1}));
  EXPECT_LT(max_abs_diff(diag.plan.values(), Matrix{{0.5, 0}, {0, 0.5}}), 1e-12);

  std::mt19937_64 g(9);
  const Matrix C = scotm::testing::random_matrix(3, 3, g);
  const Marginals ab3(uniform(3), uniform(3));
  const auto lp = global_oracle(C, ab3, {2, 2}, {0.0, 0.5});
  double best = 1e300;
  for (const Mask &mask : enumerate_feasible_supports(3, 3, {2, 2}, ab3))
    best = std::min(best, linear_cost(C, min_cost_flow(C, ab3, mask).plan));
  EXPECT_NEAR(lp.G, best, 1e-12);

  const ObjectiveParams p{0.1, 0.5};
  const auto fullb = global_oracle(C, ab3, {3, 3}, p);
  EXPECT_EQ(fullb.mask, Mask(9, 1));
  EXPECT_NEAR(fullb.G, restricted_solve(C, ab3, p, Mask(9, 1)).G, 1e-14);
}

TEST(GlobalOracle, LowerBoundsSolver) {
  std::mt19937_64 g(2024);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = scotm::testing::random_tiny_instance(g);
    const auto o = global_oracle(inst.C, inst.ab, inst.budget, inst.p);
    SolverConfig cfg;
    cfg.gamma = inst.p.gamma;
    cfg.q = inst.p.q;
    const auto r = solve(CostMatrix(inst.C), inst.ab, inst.budget, cfg);
    EXPECT_GE(r.objective_G, o.G - 1e-9);
  }
}

TEST(ExtendToBudget, Maximal) {
  const Matrix C{{0.1, 0.5, 0.2}, {0.3, 0.0, 0.9}};
  const Mask m = extend_to_budget(Mask{1, 0, 0, 0, 0, 0}, C, {2, 1});
  EXPECT_EQ(m, (Mask{1, 0, 1, 0, 1, 0}));
}

TEST(FiniteDiff, Examples) {
  std::mt19937_64 g(1);
  const Matrix X = scotm::testing::random_matrix(3, 2, g);
  auto half_sq = [](const Matrix &Y) { return 0.5 * squared_distance(Y, Matrix(Y.rows(), Y.cols())); };
  const auto fd = finite_diff_gradient(half_sq, X, 1e-6);
  EXPECT_LT(max_abs_diff(fd.grad, X), 1e-8);
  EXPECT_FALSE(fd.any_one_sided);

  const Matrix Y = scotm::testing::random_matrix(3, 3, g, 0.05, 1.0);
  auto H = [](const Matrix &Z) { return deformed_q_entropy(Z, 0.5); };
  const auto fh = finite_diff_gradient(H, Y, 1e-6);
  const Matrix an = entropy_gradient(Y, 0.5);
  for (std::size_t k = 0; k < an.size(); ++k)
    EXPECT_NEAR(fh.grad.flat()[k], an.flat()[k], 1e-5 * std::abs(an.flat()[k]));

  const auto edge = finite_diff_gradient(H, Matrix{{0.0, 0.5}}, 1e-6);
  EXPECT_TRUE(edge.any_one_sided);
  EXPECT_EQ(edge.one_sided, (Mask{1, 0}));
}

TEST(FiniteDiff, NonFinite) {
  auto f = [](const Matrix &X) { return std::log(X(0, 0)); };
  EXPECT_THROW(finite_diff_gradient(f, Matrix{{0.0}}, 1e-6), Error);
}
