/// @file
/// @brief Domain types shared by the solver: dense matrices, costs, marginals,
/// matching budgets, transport plans and the four-way split state.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace scotm {

enum class ErrorCode {
  DimensionMismatch,
  NonFiniteCost,
  MarginalNotSimplex,
  BudgetOutOfRange,
  QOutOfRange,
  NonFiniteInput,
  NonFiniteObjective,
  PriorityHOutOfRange,
  PriorityConstructionInfeasible,
  InitInfeasible,
  InfeasibleInstance,
  SupportBudgetViolated,
  CombinatorialBlowup,
  RestrictedInfeasible,
  EmptyPlan,
  EmptyTruth,
  NoPrioritizedPoints,
  RankOutOfRange,
  InvalidConfig,
  Io,
  Parse,
};

inline const char *to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  case ErrorCode::NonFiniteCost: return "NonFiniteCost";
  case ErrorCode::MarginalNotSimplex: return "MarginalNotSimplex";
  case ErrorCode::BudgetOutOfRange: return "BudgetOutOfRange";
  case ErrorCode::QOutOfRange: return "QOutOfRange";
  case ErrorCode::NonFiniteInput: return "NonFiniteInput";
  case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
  case ErrorCode::PriorityHOutOfRange: return "PriorityHOutOfRange";
  case ErrorCode::PriorityConstructionInfeasible: return "PriorityConstructionInfeasible";
  case ErrorCode::InitInfeasible: return "InitInfeasible";
  case ErrorCode::InfeasibleInstance: return "InfeasibleInstance";
  case ErrorCode::SupportBudgetViolated: return "SupportBudgetViolated";
  case ErrorCode::CombinatorialBlowup: return "CombinatorialBlowup";
  case ErrorCode::RestrictedInfeasible: return "RestrictedInfeasible";
  case ErrorCode::EmptyPlan: return "EmptyPlan";
  case ErrorCode::EmptyTruth: return "EmptyTruth";
  case ErrorCode::NoPrioritizedPoints: return "NoPrioritizedPoints";
  case ErrorCode::RankOutOfRange: return "RankOutOfRange";
  case ErrorCode::InvalidConfig: return "InvalidConfig";
  case ErrorCode::Io: return "Io";
  case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_)
      throw Error(ErrorCode::DimensionMismatch,
                  "matrix storage does not match rows*cols");
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto &r : rows) {
      if (r.size() != cols_)
        throw Error(ErrorCode::DimensionMismatch, "ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  bool same_shape(const Matrix &o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j)
        t(j, i) = (*this)(i, j);
    return t;
  }

  friend bool operator==(const Matrix &, const Matrix &) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const Matrix &x, const Matrix &y,
                               const char *what) {
  if (!x.same_shape(y))
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(x.rows()) + "x" +
                    std::to_string(x.cols()) + " vs " +
                    std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
}

inline double squared_distance(const Matrix &x, const Matrix &y) {
  require_same_shape(x, y, "squared_distance");
  double s = 0.0;
  auto xs = x.flat(), ys = y.flat();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double d = xs[k] - ys[k];
    s += d * d;
  }
  return s;
}

inline double frobenius_distance(const Matrix &x, const Matrix &y) {
  return std::sqrt(squared_distance(x, y));
}

inline Vector row_sums(const Matrix &x) {
  Vector s(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (double v : x.row(i))
      s[i] += v;
  return s;
}

inline Vector col_sums(const Matrix &x) {
  Vector s(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j)
      s[j] += r[j];
  }
  return s;
}

inline std::size_t row_nnz(const Matrix &x, std::size_t i, double tol = 0.0) {
  auto r = x.row(i);
  return static_cast<std::size_t>(
      std::count_if(r.begin(), r.end(), [tol](double v) { return v > tol; }));
}

inline std::size_t col_nnz(const Matrix &x, std::size_t j, double tol = 0.0) {
  std::size_t c = 0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    c += x(i, j) > tol;
  return c;
}

inline std::size_t nnz(const Matrix &x, double tol = 0.0) {
  auto f = x.flat();
  return static_cast<std::size_t>(
      std::count_if(f.begin(), f.end(), [tol](double v) { return v > tol; }));
}

inline double max_abs_deviation(std::span<const double> x,
                                std::span<const double> target) {
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    worst = std::max(worst, std::abs(x[k] - target[k]));
  return worst;
}

/// Dense m x n matrix of finite costs.
class CostMatrix {
public:
  explicit CostMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() == 0 || values_.cols() == 0)
      throw Error(ErrorCode::DimensionMismatch, "cost matrix must be non-empty");
    for (double v : values_.flat())
      if (!std::isfinite(v))
        throw Error(ErrorCode::NonFiniteCost, "cost matrix has a non-finite entry");
  }

  std::size_t rows() const noexcept { return values_.rows(); }
  std::size_t cols() const noexcept { return values_.cols(); }
  const Matrix &values() const noexcept { return values_; }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }

  friend bool operator==(const CostMatrix &, const CostMatrix &) = default;

private:
  Matrix values_;
};

inline constexpr double kMarginalSumTol = 1e-12;

/// Source and target probability vectors.
class Marginals {
public:
  /// With `normalize`, each vector is rescaled to unit mass before the
  /// simplex check.
  Marginals(Vector a, Vector b, bool normalize = false)
      : a_(std::move(a)), b_(std::move(b)) {
    check_and_scale(a_, "a", normalize);
    check_and_scale(b_, "b", normalize);
  }

  const Vector &a() const noexcept { return a_; }
  const Vector &b() const noexcept { return b_; }
  std::size_t m() const noexcept { return a_.size(); }
  std::size_t n() const noexcept { return b_.size(); }

  friend bool operator==(const Marginals &, const Marginals &) = default;

private:
  static void check_and_scale(Vector &v, const char *name, bool normalize) {
    if (v.empty())
      throw Error(ErrorCode::DimensionMismatch,
                  std::string("marginal ") + name + " is empty");
    for (double x : v)
      if (!std::isfinite(x) || x < 0.0)
        throw Error(ErrorCode::MarginalNotSimplex,
                    std::string("marginal ") + name +
                        " has a negative or non-finite entry");
    double s = std::accumulate(v.begin(), v.end(), 0.0);
    if (normalize && s > 0.0) {
      for (double &x : v)
        x /= s;
      s = std::accumulate(v.begin(), v.end(), 0.0);
    }
    if (std::abs(s - 1.0) > kMarginalSumTol)
      throw Error(ErrorCode::MarginalNotSimplex,
                  std::string("marginal ") + name + " sums to " +
                      std::to_string(s));
  }

  Vector a_;
  Vector b_;
};

/// Per-row (`rho_s`) and per-column (`rho_t`) caps on non-zero entries.
struct BudgetSpec {
  std::size_t rho_s = 1;
  std::size_t rho_t = 1;

  void check(std::size_t m, std::size_t n) const {
    if (rho_s < 1 || rho_s > n)
      throw Error(ErrorCode::BudgetOutOfRange,
                  "rho_s=" + std::to_string(rho_s) + " outside [1, " +
                      std::to_string(n) + "]");
    if (rho_t < 1 || rho_t > m)
      throw Error(ErrorCode::BudgetOutOfRange,
                  "rho_t=" + std::to_string(rho_t) + " outside [1, " +
                      std::to_string(m) + "]");
  }

  friend bool operator==(const BudgetSpec &, const BudgetSpec &) = default;
};

/// Non-negative m x n matrix of transported mass.
class TransportPlan {
public:
  TransportPlan() = default;
  explicit TransportPlan(Matrix values) : values_(std::move(values)) {
    for (double v : values_.flat())
      if (!(v >= 0.0))
        throw Error(ErrorCode::NonFiniteInput,
                    "transport plan entries must be finite and non-negative");
  }

  const Matrix &values() const noexcept { return values_; }
  std::size_t rows() const noexcept { return values_.rows(); }
  std::size_t cols() const noexcept { return values_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }

  friend bool operator==(const TransportPlan &, const TransportPlan &) = default;

private:
  Matrix values_;
};

inline constexpr double kSplitSumTol = 1e-9;

/// The coupled iterates of the penalty method: T has row sums a, U has column
/// sums b, V has at most rho_s non-zeros per row and W at most rho_t per column.
struct SplitState {
  Matrix T, U, V, W;

  /// Re-checks all four membership conditions; throws on violation.
  static SplitState make(Matrix T, Matrix U, Matrix V, Matrix W,
                         const Marginals &ab, const BudgetSpec &budget) {
    SplitState s{std::move(T), std::move(U), std::move(V), std::move(W)};
    s.check(ab, budget);
    return s;
  }

  static SplitState replicate(const Matrix &X) { return {X, X, X, X}; }

  void check(const Marginals &ab, const BudgetSpec &budget) const {
    require_same_shape(T, U, "SplitState U");
    require_same_shape(T, V, "SplitState V");
    require_same_shape(T, W, "SplitState W");
    if (T.rows() != ab.m() || T.cols() != ab.n())
      throw Error(ErrorCode::DimensionMismatch, "SplitState vs marginals");
    for (const Matrix *x : {&T, &U, &V, &W})
      for (double v : x->flat())
        if (!(v >= 0.0))
          throw Error(ErrorCode::NonFiniteInput, "SplitState entry negative");
    if (max_abs_deviation(row_sums(T), ab.a()) > kSplitSumTol)
      throw Error(ErrorCode::MarginalNotSimplex, "T row sums differ from a");
    if (max_abs_deviation(col_sums(U), ab.b()) > kSplitSumTol)
      throw Error(ErrorCode::MarginalNotSimplex, "U column sums differ from b");
    for (std::size_t i = 0; i < V.rows(); ++i)
      if (row_nnz(V, i) > budget.rho_s)
        throw Error(ErrorCode::BudgetOutOfRange, "V row exceeds rho_s");
    for (std::size_t j = 0; j < W.cols(); ++j)
      if (col_nnz(W, j) > budget.rho_t)
        throw Error(ErrorCode::BudgetOutOfRange, "W column exceeds rho_t");
  }

  /// sqrt(|T-U|^2 + |T-V|^2 + |T-W|^2)
  double residual() const {
    return std::sqrt(squared_distance(T, U) + squared_distance(T, V) +
                     squared_distance(T, W));
  }
};

struct ArmijoParams {
  double init_step = 1.0;
  double shrink = 0.5;
  double c1 = 1e-4;
  int max_backtracks = 50;

  void check() const {
    if (!(init_step > 0.0) || !(shrink > 0.0 && shrink < 1.0) ||
        !(c1 > 0.0 && c1 < 1.0) || max_backtracks < 1)
      throw Error(ErrorCode::InvalidConfig, "invalid Armijo parameters");
  }
};

/// Hyperparameters of the penalty solver. Defaults follow the published
/// experimental setup (sigma0 = 10, theta = 2, eps_k = 0.99^k * scale), except
/// that the tolerance scale is 1e-6 rather than 1e-4.
struct SolverConfig {
  double gamma = 0.1;
  double q = 0.9;
  double sigma0 = 10.0;
  double theta = 2.0;
  double eps_base = 0.99;
  double eps_scale = 1e-6;
  double outer_tol = 1e-4;
  int max_outer = 200;
  int max_inner = 10000;
  ArmijoParams armijo{};
  double zero_tol = 1e-9;
  /// Re-optimize G exactly on the support of the snapped plan.
  bool polish = true;
  int polish_iters = 500;
  std::uint64_t seed = 0;

  double eps_at(int k) const { return eps_scale * std::pow(eps_base, k); }

  void check() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw Error(ErrorCode::InvalidConfig, "gamma must be positive");
    if (!(q >= 0.0 && q < 1.0))
      throw Error(ErrorCode::QOutOfRange, "q must lie in [0, 1)");
    if (!(sigma0 > 0.0))
      throw Error(ErrorCode::InvalidConfig, "sigma0 must be positive");
    if (!(theta > 1.0))
      throw Error(ErrorCode::InvalidConfig, "theta must exceed 1");
    if (!(eps_base > 0.0 && eps_base < 1.0) || !(eps_scale > 0.0))
      throw Error(ErrorCode::InvalidConfig, "invalid inner tolerance schedule");
    if (!(outer_tol > 0.0) || max_outer < 1 || max_inner < 1 ||
        !(zero_tol > 0.0) || polish_iters < 1)
      throw Error(ErrorCode::InvalidConfig, "invalid stopping parameters");
    armijo.check();
  }
};

struct OuterRecord {
  double sigma = 0.0;
  int inner_iters = 0;
  double J_value = 0.0;
  double residual = 0.0;
  bool warm_start_kept = true;
  bool hit_max_inner = false;
};

struct SolverReport {
  TransportPlan final_plan;
  int outer_iters = 0;
  int total_inner_iters = 0;
  double objective_G = 0.0;
  double residual = 0.0;
  /// Support-restricted projected-gradient norm of the final plan.
  double stationarity = 0.0;
  /// Frobenius distance between the last T iterate and the snapped plan.
  double snap_distance = 0.0;
  double max_marginal_violation = 0.0;
  /// G of the snapped plan before the support polish.
  double objective_G_snapped = 0.0;
  bool polished = false;
  bool converged = false;
  bool max_inner_hit = false;
  std::vector<OuterRecord> per_outer;
  double wall_time = 0.0;
};

/// A cost matrix, marginals and budget that have been checked against each
/// other.
class ValidatedInstance {
public:
  const CostMatrix &cost() const noexcept { return cost_; }
  const Marginals &marginals() const noexcept { return ab_; }
  const BudgetSpec &budget() const noexcept { return budget_; }
  std::size_t m() const noexcept { return cost_.rows(); }
  std::size_t n() const noexcept { return cost_.cols(); }

  friend bool operator==(const ValidatedInstance &,
                         const ValidatedInstance &) = default;

private:
  ValidatedInstance(CostMatrix c, Marginals ab, BudgetSpec budget)
      : cost_(std::move(c)), ab_(std::move(ab)), budget_(budget) {}

  friend ValidatedInstance validate_instance(const CostMatrix &,
                                             const Marginals &,
                                             const BudgetSpec &);

  CostMatrix cost_;
  Marginals ab_;
  BudgetSpec budget_;
};

inline ValidatedInstance validate_instance(const CostMatrix &C,
                                           const Marginals &ab,
                                           const BudgetSpec &budget) {
  if (ab.m() != C.rows() || ab.n() != C.cols())
    throw Error(ErrorCode::DimensionMismatch,
                "marginal lengths (" + std::to_string(ab.m()) + ", " +
                    std::to_string(ab.n()) + ") do not match cost " +
                    std::to_string(C.rows()) + "x" + std::to_string(C.cols()));
  // Re-run the type invariants; both constructors already enforced them.
  CostMatrix c2(C.values());
  Marginals ab2(ab.a(), ab.b());
  budget.check(C.rows(), C.cols());
  return ValidatedInstance(std::move(c2), std::move(ab2), budget);
}

inline ValidatedInstance validate_instance(const ValidatedInstance &inst) {
  return validate_instance(inst.cost(), inst.marginals(), inst.budget());
}

} // namespace scotm
