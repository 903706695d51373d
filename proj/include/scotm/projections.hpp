/// @file
/// @brief Closed-form Euclidean projections used by the split iterates:
/// rows onto scaled simplexes, columns onto scaled simplexes, and top-rho
/// hard thresholding along rows or columns.
#pragma once

#include "scotm/core.hpp"

namespace scotm {

/// Projection onto {x >= 0, sum x = mass}, written into `out`.
/// `scratch` must hold v.size() entries. Active-set threshold iteration
/// (Michelot): the threshold only grows, so dropped entries never return.
inline void project_simplex_into(std::span<const double> v, double mass,
                                 std::span<double> out,
                                 std::span<double> scratch) {
  std::size_t active = v.size();
  double sum = 0.0;
  for (std::size_t j = 0; j < active; ++j) {
    scratch[j] = v[j];
    sum += v[j];
  }
  double tau = (sum - mass) / static_cast<double>(active);
  for (;;) {
    std::size_t kept = 0;
    sum = 0.0;
    for (std::size_t j = 0; j < active; ++j) {
      if (scratch[j] > tau) {
        scratch[kept++] = scratch[j];
        sum += scratch[j];
      }
    }
    if (kept == active || kept == 0)
      break;
    active = kept;
    tau = (sum - mass) / static_cast<double>(active);
  }
  for (std::size_t j = 0; j < v.size(); ++j)
    out[j] = std::max(v[j] - tau, 0.0);
}

/// argmin_{x >= 0, sum x = mass} |x - v|_2
inline Vector project_simplex(std::span<const double> v, double mass) {
  if (v.empty())
    throw Error(ErrorCode::DimensionMismatch, "project_simplex on empty vector");
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw Error(ErrorCode::NonFiniteInput, "simplex mass must be positive");
  for (double x : v)
    if (!std::isfinite(x))
      throw Error(ErrorCode::NonFiniteInput, "project_simplex input not finite");
  Vector out(v.size()), scratch(v.size());
  project_simplex_into(v, mass, out, scratch);
  return out;
}

namespace detail {

inline void check_finite(const Matrix &M, const char *what) {
  for (double x : M.flat())
    if (!std::isfinite(x))
      throw Error(ErrorCode::NonFiniteInput, std::string(what) + ": non-finite");
}

// Rows of M onto scaled simplexes with masses `mass` (mass 0 rows become 0).
inline void project_rows_into(const Matrix &M, std::span<const double> mass,
                              Matrix &out, std::vector<double> &scratch) {
  scratch.resize(M.cols());
  for (std::size_t i = 0; i < M.rows(); ++i) {
    if (mass[i] > 0.0) {
      project_simplex_into(M.row(i), mass[i], out.row(i), scratch);
    } else {
      auto r = out.row(i);
      std::fill(r.begin(), r.end(), 0.0);
    }
  }
}

// Keeps the `keep` largest entries of `v` (after clamping at zero); ties go to
// the lower index. `scratch` is workspace.
inline void keep_top(std::span<double> v, std::size_t keep,
                     std::vector<double> &scratch) {
  const std::size_t n = v.size();
  for (double &x : v)
    x = std::max(x, 0.0);
  if (keep >= n)
    return;
  scratch.assign(v.begin(), v.end());
  std::nth_element(scratch.begin(), scratch.begin() + (keep - 1), scratch.end(),
                   std::greater<>());
  const double thr = scratch[keep - 1];
  std::size_t above = 0;
  for (double x : v)
    above += x > thr;
  std::size_t ties_left = keep - above;
  for (double &x : v) {
    if (x > thr)
      continue;
    if (x == thr && ties_left > 0)
      --ties_left;
    else
      x = 0.0;
  }
}

// Column-wise variants working on strided data through a gather buffer.
inline void project_cols_into(const Matrix &M, std::span<const double> mass,
                              Matrix &out, std::vector<double> &col,
                              std::vector<double> &res, std::vector<double> &scratch) {
  const std::size_t m = M.rows(), n = M.cols();
  col.resize(m);
  res.resize(m);
  scratch.resize(m);
  for (std::size_t j = 0; j < n; ++j) {
    if (!(mass[j] > 0.0)) {
      for (std::size_t i = 0; i < m; ++i)
        out(i, j) = 0.0;
      continue;
    }
    for (std::size_t i = 0; i < m; ++i)
      col[i] = M(i, j);
    project_simplex_into(col, mass[j], res, scratch);
    for (std::size_t i = 0; i < m; ++i)
      out(i, j) = res[i];
  }
}

inline void keep_top_cols(Matrix &M, std::size_t keep, std::vector<double> &col,
                          std::vector<double> &scratch) {
  const std::size_t m = M.rows(), n = M.cols();
  col.resize(m);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i)
      col[i] = M(i, j);
    keep_top(col, keep, scratch);
    for (std::size_t i = 0; i < m; ++i)
      M(i, j) = col[i];
  }
}

} // namespace detail

/// Each row i of M projected onto {x >= 0, sum x = a_i}.
inline Matrix project_rows_omega1(const Matrix &M, std::span<const double> a) {
  if (a.size() != M.rows())
    throw Error(ErrorCode::DimensionMismatch, "project_rows_omega1: len(a) != rows");
  detail::check_finite(M, "project_rows_omega1");
  Matrix out(M.rows(), M.cols());
  std::vector<double> scratch;
  detail::project_rows_into(M, a, out, scratch);
  return out;
}

/// Each column j of M projected onto {x >= 0, sum x = b_j}.
inline Matrix project_cols_omega2(const Matrix &M, std::span<const double> b) {
  if (b.size() != M.cols())
    throw Error(ErrorCode::DimensionMismatch, "project_cols_omega2: len(b) != cols");
  detail::check_finite(M, "project_cols_omega2");
  Matrix out(M.rows(), M.cols());
  std::vector<double> col, res, scratch;
  detail::project_cols_into(M, b, out, col, res, scratch);
  return out;
}

/// Keeps the rho_s largest entries of every row, zeroing the rest.
inline Matrix topk_rows_omega3(const Matrix &M, std::size_t rho_s) {
  if (rho_s < 1 || rho_s > M.cols())
    throw Error(ErrorCode::BudgetOutOfRange, "topk_rows_omega3: rho_s out of range");
  Matrix out = M;
  std::vector<double> scratch;
  for (std::size_t i = 0; i < out.rows(); ++i)
    detail::keep_top(out.row(i), rho_s, scratch);
  return out;
}

/// Keeps the rho_t largest entries of every column, zeroing the rest.
inline Matrix topk_cols_omega4(const Matrix &M, std::size_t rho_t) {
  if (rho_t < 1 || rho_t > M.rows())
    throw Error(ErrorCode::BudgetOutOfRange, "topk_cols_omega4: rho_t out of range");
  Matrix out = M;
  std::vector<double> col, scratch;
  detail::keep_top_cols(out, rho_t, col, scratch);
  return out;
}

} // namespace scotm
