/// @file
#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace scotm;

namespace {

ErrorCode code_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "no scotm::Error thrown";
  return ErrorCode::Io;
}

} // namespace

TEST(Density, Examples) {
  Matrix T(30, 30);
  for (std::size_t i = 0; i < 30; ++i) {
    T(i, i) = 0.5 / 30;
    T(i, (i + 1) % 30) = 0.5 / 30;
  }
  EXPECT_NEAR(density_percent(T), 6.7, 0.05);
  EXPECT_EQ(density_percent(Matrix(3, 3)), 0.0);
  EXPECT_EQ(density_percent(Matrix(3, 3, 0.1)), 100.0);
  EXPECT_EQ(density_percent(Matrix{{1e-12, 1.0}}), 50.0);
}

TEST(Pppm, Examples) {
  const Matrix full(2, 2, 0.25);
  EXPECT_DOUBLE_EQ(pppm(full, {0}), 0.5);
  EXPECT_DOUBLE_EQ(pppm(full, {}), 0.0);
  EXPECT_DOUBLE_EQ(pppm(Matrix{{0.5, 0.5}, {0, 0}}, {0}), 1.0);
  EXPECT_EQ(code_of([] { pppm(Matrix(2, 2), {0}); }), ErrorCode::EmptyPlan);
}

TEST(Pppm, ComplementSumsToOne) {
  std::mt19937_64 g(2);
  Matrix T = scotm::testing::random_matrix(6, 5, g, -0.5, 1.0);
  for (double &x : T.flat())
    x = std::max(x, 0.0);
  EXPECT_DOUBLE_EQ(pppm(T, {0, 2}) + pppm(T, {1, 3, 4, 5}), 1.0);
}

TEST(Psmbpp, Examples) {
  EXPECT_DOUBLE_EQ(psmbpp(Matrix{{0.25, 0.25}, {0.5, 0}}, {0}, {2, 2}), 1.0);
  EXPECT_DOUBLE_EQ(psmbpp(Matrix{{0.5, 0}, {0.25, 0.25}}, {0}, {2, 2}), 0.5);
  EXPECT_EQ(code_of([] { psmbpp(Matrix(2, 2, 0.25), {}, {2, 2}); }),
            ErrorCode::NoPrioritizedPoints);
}

TEST(TopkCoverage, Examples) {
  const RankMatrix ranks{{1, 2, 3}, {3, 1, 2}};
  EXPECT_DOUBLE_EQ(topk_coverage(Matrix{{0.5, 0, 0}, {0, 0.5, 0}}, ranks, 1, 1), 100.0);
  EXPECT_DOUBLE_EQ(topk_coverage(Matrix(2, 3), ranks, 1, 1), 0.0);
  EXPECT_DOUBLE_EQ(topk_coverage(Matrix{{0, 0.5, 0.5}}, RankMatrix{{1, 2, 3}}, 2, 2), 50.0);
  EXPECT_EQ(code_of([] { topk_coverage(Matrix{{1.0}}, RankMatrix{{0}}, 1, 1); }),
            ErrorCode::RankOutOfRange);
}

TEST(PrecisionRecall, Examples) {
  const Matrix T{{0.5, 0}, {0, 0.5}};
  const auto same = precision_recall_f1(T, {{0, 0}, {1, 1}});
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  EXPECT_EQ(same.f1, 1.0);

  const auto none = precision_recall_f1(T, {{0, 1}});
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);

  const Matrix T2{{0.5, 0.5, 0}, {0, 0, 0}};
  const auto half = precision_recall_f1(T2, {{0, 0}, {1, 0}, {1, 1}, {1, 2}});
  EXPECT_DOUBLE_EQ(half.precision, 0.5);
  EXPECT_DOUBLE_EQ(half.recall, 0.25);
  EXPECT_NEAR(half.f1, 1.0 / 3.0, 1e-15);
  EXPECT_GE(half.f1, half.recall);
  EXPECT_LE(half.f1, half.precision);

  EXPECT_EQ(code_of([] { precision_recall_f1(Matrix(2, 2), {{0, 0}}); }), ErrorCode::EmptyPlan);
  EXPECT_EQ(code_of([&] { precision_recall_f1(T, {}); }), ErrorCode::EmptyTruth);
}
