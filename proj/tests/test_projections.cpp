/// @file
#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace scotm;
using scotm::testing::max_abs_diff;
using scotm::testing::random_matrix;

TEST(ProjectSimplex, Examples) {
  EXPECT_EQ(project_simplex(Vector{0.2, 0.8}, 1.0), (Vector{0.2, 0.8}));
  EXPECT_EQ(project_simplex(Vector{1.0, 1.0}, 1.0), (Vector{0.5, 0.5}));
  const Vector x = project_simplex(Vector{0.9, 0.1, -0.5}, 1.0);
  EXPECT_NEAR(x[0], 0.9, 1e-15);
  EXPECT_NEAR(x[1], 0.1, 1e-15);
  EXPECT_EQ(x[2], 0.0);
  EXPECT_THROW(project_simplex(Vector{std::nan(""), 1.0}, 1.0), Error);
}

// Exhaustive grid over the simplex (resolution 1e-3 in 3 dimensions; coarser
// grid plus local refinement is not needed at this size).
TEST(ProjectSimplex, NearestPointAgainstGrid) {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> U(-0.5, 1.5);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector v{U(g), U(g), U(g)};
    const Vector x = project_simplex(v, 1.0);
    auto dist2 = [&](double p0, double p1, double p2) {
      return (p0 - v[0]) * (p0 - v[0]) + (p1 - v[1]) * (p1 - v[1]) + (p2 - v[2]) * (p2 - v[2]);
    };
    const double dx = dist2(x[0], x[1], x[2]);
    double best = 1e300;
    const int N = 1000;
    for (int i = 0; i <= N; ++i)
      for (int j = 0; i + j <= N; ++j)
        best = std::min(best, dist2(i / double(N), j / double(N), (N - i - j) / double(N)));
    EXPECT_LE(std::sqrt(dx), std::sqrt(best) + 1e-6);
    EXPECT_NEAR(x[0] + x[1] + x[2], 1.0, 1e-12);
  }
}

TEST(ProjectSimplex, KktConditions) {
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vector v(7);
    for (double &e : v)
      e = U(g);
    const double mass = 0.1 + std::abs(U(g));
    const Vector x = project_simplex(v, mass);
    // x = max(v - tau, 0) for one threshold tau.
    double tau = 0.0;
    int pos = 0;
    for (std::size_t k = 0; k < v.size(); ++k)
      if (x[k] > 0.0) {
        tau += v[k] - x[k];
        ++pos;
      }
    ASSERT_GT(pos, 0);
    tau /= pos;
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      s += x[k];
      EXPECT_NEAR(x[k], std::max(v[k] - tau, 0.0), 1e-12);
    }
    EXPECT_NEAR(s, mass, 1e-12);
  }
}

TEST(ProjectRows, Examples) {
  const Matrix P{{0.1, 0.15}, {0.3, 0.45}};
  const Vector a{0.25, 0.75};
  EXPECT_LT(max_abs_diff(project_rows_omega1(P, a), P), 1e-12);
  EXPECT_EQ(project_rows_omega1(Matrix{{1, 1}}, Vector{1.0}), (Matrix{{0.5, 0.5}}));

  std::mt19937_64 g(1);
  const Matrix M = random_matrix(4, 5, g, -1, 1);
  const Vector u(4, 0.25);
  const Matrix X = project_rows_omega1(M, u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(row_sums(X)[i], 0.25, 1e-12);
    const Vector r = project_simplex(M.row(i), 0.25);
    for (std::size_t j = 0; j < 5; ++j)
      EXPECT_EQ(X(i, j), r[j]);
  }
  EXPECT_THROW(project_rows_omega1(M, Vector(3, 1.0 / 3)), Error);
}

TEST(ProjectCols, TransposeSymmetry) {
  std::mt19937_64 g(2);
  const Matrix M = random_matrix(5, 4, g, -1, 1);
  const Vector b = scotm::testing::random_simplex(4, g);
  const Matrix X = project_cols_omega2(M, b);
  EXPECT_EQ(X, project_rows_omega1(M.transposed(), b).transposed());
  for (std::size_t j = 0; j < 4; ++j)
    EXPECT_NEAR(col_sums(X)[j], b[j], 1e-12);
  EXPECT_EQ(project_cols_omega2(Matrix{{1}, {1}}, Vector{1.0}), (Matrix{{0.5}, {0.5}}));
}

TEST(TopkRows, Examples) {
  EXPECT_EQ(topk_rows_omega3(Matrix{{3, 1, 2}}, 2), (Matrix{{3, 0, 2}}));
  EXPECT_EQ(topk_rows_omega3(Matrix{{2, 2, 2}}, 1), (Matrix{{2, 0, 0}}));
  const Matrix M{{0.3, 0.1, 0.7}, {0.0, 0.9, 0.2}};
  EXPECT_EQ(topk_rows_omega3(M, 3), M);
  EXPECT_EQ(topk_rows_omega3(Matrix{{-1, 2, 0.5}}, 2), (Matrix{{0, 2, 0.5}}));
  EXPECT_THROW(topk_rows_omega3(M, 0), Error);
  EXPECT_THROW(topk_rows_omega3(M, 4), Error);
}

TEST(TopkRows, TiesGoToLowerIndex) {
  EXPECT_EQ(topk_rows_omega3(Matrix{{1, 3, 1, 3, 1}}, 3), (Matrix{{1, 3, 0, 3, 0}}));
}

TEST(TopkCols, Examples) {
  EXPECT_EQ(topk_cols_omega4(Matrix{{1}, {5}, {3}}, 1), (Matrix{{0}, {5}, {0}}));
  std::mt19937_64 g(3);
  const Matrix M = random_matrix(4, 6, g);
  EXPECT_EQ(topk_cols_omega4(M, 4), M);
  EXPECT_EQ(topk_cols_omega4(M, 2), topk_rows_omega3(M.transposed(), 2).transposed());
}

TEST(Projections, Idempotent) {
  std::mt19937_64 g(6);
  const Matrix M = random_matrix(5, 6, g, -0.5, 1.0);
  const Vector a = scotm::testing::random_simplex(5, g);
  const Vector b = scotm::testing::random_simplex(6, g);
  const Matrix P1 = project_rows_omega1(M, a);
  EXPECT_LT(max_abs_diff(project_rows_omega1(P1, a), P1), 1e-12);
  const Matrix P2 = project_cols_omega2(M, b);
  EXPECT_LT(max_abs_diff(project_cols_omega2(P2, b), P2), 1e-12);
  const Matrix P3 = topk_rows_omega3(M, 2);
  EXPECT_EQ(topk_rows_omega3(P3, 2), P3);
  const Matrix P4 = topk_cols_omega4(M, 3);
  EXPECT_EQ(topk_cols_omega4(P4, 3), P4);
  for (std::size_t i = 0; i < 5; ++i)
    EXPECT_LE(row_nnz(P3, i), 2u);
  for (std::size_t j = 0; j < 6; ++j)
    EXPECT_LE(col_nnz(P4, j), 3u);
}

// The Omega1 projection cross-checked against an independent route: the row
// problem is a QP whose optimum satisfies x = max(v - tau, 0); tau is found
// here by bisection.
TEST(Projections, RowProjectionAgainstBisection) {
  std::mt19937_64 g(12);
  const Matrix M = random_matrix(6, 9, g, -1, 1);
  const Vector a = scotm::testing::random_simplex(6, g);
  const Matrix X = project_rows_omega1(M, a);
  for (std::size_t i = 0; i < 6; ++i) {
    double lo = -10, hi = 10;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      double s = 0;
      for (double v : M.row(i))
        s += std::max(v - mid, 0.0);
      (s > a[i] ? lo : hi) = mid;
    }
    for (std::size_t j = 0; j < 9; ++j)
      EXPECT_NEAR(X(i, j), std::max(M(i, j) - lo, 0.0), 1e-12);
  }
}
