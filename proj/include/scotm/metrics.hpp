/// @file
/// @brief Evaluation quantities for transport plans: density, prioritized
/// matching proportions, preference coverage and matching P/R/F1.
#pragma once

#include <set>
#include <utility>

#include "scotm/core.hpp"

namespace scotm {

/// Percentage of entries above `zero_tol`.
inline double density_percent(const Matrix &T, double zero_tol = 1e-9) {
  if (T.size() == 0)
    return 0.0;
  return 100.0 * static_cast<double>(nnz(T, zero_tol)) /
         static_cast<double>(T.size());
}

inline double density_percent(const TransportPlan &T, double zero_tol = 1e-9) {
  return density_percent(T.values(), zero_tol);
}

namespace detail {

inline std::size_t prioritized_nnz(const Matrix &T,
                                   const std::vector<std::size_t> &prioritized,
                                   double zero_tol) {
  std::set<std::size_t> rows(prioritized.begin(), prioritized.end());
  std::size_t c = 0;
  for (std::size_t i : rows) {
    if (i >= T.rows())
      throw Error(ErrorCode::DimensionMismatch, "prioritized index out of range");
    c += row_nnz(T, i, zero_tol);
  }
  return c;
}

} // namespace detail

/// Share of the plan's non-zeros that sit in prioritized rows.
inline double pppm(const Matrix &T, const std::vector<std::size_t> &prioritized,
                   double zero_tol = 1e-9) {
  const std::size_t total = nnz(T, zero_tol);
  if (total == 0)
    throw Error(ErrorCode::EmptyPlan, "plan has no non-zero entry");
  return static_cast<double>(detail::prioritized_nnz(T, prioritized, zero_tol)) /
         static_cast<double>(total);
}

/// Non-zeros in prioritized rows over rho_s times the number of prioritized
/// rows: the fraction of their matching budget actually used.
inline double psmbpp(const Matrix &T, const std::vector<std::size_t> &prioritized,
                     const BudgetSpec &budget, double zero_tol = 1e-9) {
  const std::set<std::size_t> rows(prioritized.begin(), prioritized.end());
  if (rows.empty())
    throw Error(ErrorCode::NoPrioritizedPoints, "no prioritized rows");
  return static_cast<double>(detail::prioritized_nnz(T, prioritized, zero_tol)) /
         (static_cast<double>(budget.rho_s) * static_cast<double>(rows.size()));
}

/// Integer preference ranks (1 = favorite), one per cell.
using RankMatrix = std::vector<std::vector<int>>;

/// Percentage of rank-<=k slots that are matched. The denominator counts, per
/// row, the cells of rank <= k capped at `cap` (the number of partners a row
/// may take); the numerator counts non-zeros of T with rank <= k.
inline double topk_coverage(const Matrix &T, const RankMatrix &ranks, int k,
                            std::size_t cap, double zero_tol = 1e-9) {
  if (ranks.size() != T.rows())
    throw Error(ErrorCode::DimensionMismatch, "rank rows differ from plan rows");
  if (k < 1)
    throw Error(ErrorCode::RankOutOfRange, "k must be at least 1");
  std::size_t hit = 0, slots = 0;
  for (std::size_t i = 0; i < T.rows(); ++i) {
    if (ranks[i].size() != T.cols())
      throw Error(ErrorCode::DimensionMismatch, "rank columns differ from plan");
    std::size_t avail = 0;
    for (std::size_t j = 0; j < T.cols(); ++j) {
      const int r = ranks[i][j];
      if (r < 1)
        throw Error(ErrorCode::RankOutOfRange,
                    "rank " + std::to_string(r) + " at (" + std::to_string(i) +
                        ", " + std::to_string(j) + ")");
      if (r <= k) {
        ++avail;
        hit += T(i, j) > zero_tol;
      }
    }
    slots += std::min(avail, cap);
  }
  if (slots == 0)
    return 0.0;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(slots);
}

using PairSet = std::set<std::pair<std::size_t, std::size_t>>;

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Predicted pairs are the non-zeros of T. F1 is 0 when precision and recall
/// are both 0.
inline PrecisionRecall precision_recall_f1(const Matrix &T, const PairSet &truth,
                                           double zero_tol = 1e-9) {
  const std::size_t predicted = nnz(T, zero_tol);
  if (predicted == 0)
    throw Error(ErrorCode::EmptyPlan, "plan has no non-zero entry");
  if (truth.empty())
    throw Error(ErrorCode::EmptyTruth, "truth set is empty");
  std::size_t hit = 0;
  for (const auto &[i, j] : truth)
    if (i < T.rows() && j < T.cols() && T(i, j) > zero_tol)
      ++hit;
  PrecisionRecall r;
  r.precision = static_cast<double>(hit) / static_cast<double>(predicted);
  r.recall = static_cast<double>(hit) / static_cast<double>(truth.size());
  if (r.precision + r.recall > 0.0)
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

} // namespace scotm
