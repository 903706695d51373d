/// @file
/// @brief Deformed q-entropy, the regularized transport objective and the
/// quadratic penalty that couples the split iterates.
#pragma once

#include "scotm/core.hpp"

namespace scotm {

struct ObjectiveParams {
  double gamma = 0.1;
  double q = 0.9;

  void check() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
      throw Error(ErrorCode::InvalidConfig, "gamma must be non-negative");
    if (!(q >= 0.0 && q < 1.0))
      throw Error(ErrorCode::QOutOfRange, "q must lie in [0, 1)");
  }
};

namespace detail {

inline void check_q(double q) {
  if (!(q >= 0.0 && q < 1.0))
    throw Error(ErrorCode::QOutOfRange,
                "q=" + std::to_string(q) + " outside [0, 1)");
}

// Per-entry term of H_q given pw = t^(1-q). t^(2-q) is taken as 0 at t = 0.
inline double entropy_term_pw(double t, double pw, double q) {
  if (q == 0.0)
    return t - 0.5 * t * t;
  return -((t * pw - t) / (1.0 - q) - t) / (2.0 - q);
}

inline double pow_1mq(double t, double q) {
  return t > 0.0 ? std::pow(t, 1.0 - q) : 0.0;
}

inline double entropy_term(double t, double q) {
  return entropy_term_pw(t, q == 0.0 ? 0.0 : pow_1mq(t, q), q);
}

// Value of G at X; also stores dH_q/dT entrywise in `slope`.
inline double objective_G_with_slope(const Matrix &C, const Matrix &X, double gamma,
                                     double q, std::vector<double> &slope) {
  auto c = C.flat(), x = X.flat();
  slope.resize(x.size());
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double t = x[k];
    if (q == 0.0) {
      s += c[k] * t - gamma * (t - 0.5 * t * t);
      slope[k] = 1.0 - t;
    } else {
      const double pw = pow_1mq(t, q);
      s += c[k] * t - gamma * entropy_term_pw(t, pw, q);
      slope[k] = (1.0 - pw) / (1.0 - q);
    }
  }
  return s;
}

inline double entropy_slope(double t, double q) {
  if (q == 0.0)
    return 1.0 - t;
  const double p = t > 0.0 ? std::pow(t, 1.0 - q) : 0.0;
  return (1.0 - p) / (1.0 - q);
}

} // namespace detail

/// sum_ij C_ij T_ij
inline double linear_cost(const Matrix &C, const Matrix &T) {
  require_same_shape(C, T, "linear_cost");
  double s = 0.0;
  auto c = C.flat(), t = T.flat();
  for (std::size_t k = 0; k < c.size(); ++k)
    s += c[k] * t[k];
  return s;
}

inline double linear_cost(const CostMatrix &C, const TransportPlan &T) {
  return linear_cost(C.values(), T.values());
}

/// Deformed q-entropy for q in [0, 1):
/// H_q(T) = -1/(2-q) * sum(((T^(2-q) - T) / (1-q)) - T).
/// Reduces to sum(T - T^2/2) at q = 0.
inline double deformed_q_entropy(const Matrix &T, double q) {
  detail::check_q(q);
  double s = 0.0;
  for (double t : T.flat())
    s += detail::entropy_term(t, q);
  return s;
}

/// Elementwise dH_q/dT = (1 - T^(1-q)) / (1-q); equals 1/(1-q) at T = 0.
inline Matrix entropy_gradient(const Matrix &T, double q) {
  detail::check_q(q);
  Matrix g(T.rows(), T.cols());
  auto src = T.flat();
  auto dst = g.flat();
  for (std::size_t k = 0; k < src.size(); ++k)
    dst[k] = detail::entropy_slope(src[k], q);
  return g;
}

/// G(T) = <C, T> - gamma * H_q(T)
inline double objective_G(const Matrix &C, const Matrix &T,
                          const ObjectiveParams &p) {
  require_same_shape(C, T, "objective_G");
  detail::check_q(p.q);
  double s = 0.0;
  auto c = C.flat(), t = T.flat();
  for (std::size_t k = 0; k < c.size(); ++k)
    s += c[k] * t[k] - p.gamma * detail::entropy_term(t[k], p.q);
  return s;
}

inline double objective_G(const CostMatrix &C, const TransportPlan &T,
                          const ObjectiveParams &p) {
  return objective_G(C.values(), T.values(), p);
}

/// J_sigma(T, U, V, W) = G(T) + sigma/2 (|T-U|^2 + |T-V|^2 + |T-W|^2)
inline double penalty_J(const Matrix &C, const Matrix &T, const Matrix &U,
                        const Matrix &V, const Matrix &W,
                        const ObjectiveParams &p, double sigma) {
  require_same_shape(C, T, "penalty_J T");
  require_same_shape(T, U, "penalty_J U");
  require_same_shape(T, V, "penalty_J V");
  require_same_shape(T, W, "penalty_J W");
  detail::check_q(p.q);
  auto c = C.flat(), t = T.flat(), u = U.flat(), v = V.flat(), w = W.flat();
  double g = 0.0, pen = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    g += c[k] * t[k] - p.gamma * detail::entropy_term(t[k], p.q);
    const double du = t[k] - u[k], dv = t[k] - v[k], dw = t[k] - w[k];
    pen += du * du + dv * dv + dw * dw;
  }
  return g + 0.5 * sigma * pen;
}

inline double penalty_J(const Matrix &C, const SplitState &s,
                        const ObjectiveParams &p, double sigma) {
  return penalty_J(C, s.T, s.U, s.V, s.W, p, sigma);
}

/// dJ_sigma/dT = C - gamma * dH_q/dT + sigma (3T - U - V - W)
inline Matrix penalty_gradient_T(const Matrix &C, const SplitState &s,
                                 const ObjectiveParams &p, double sigma) {
  require_same_shape(C, s.T, "penalty_gradient_T T");
  require_same_shape(s.T, s.U, "penalty_gradient_T U");
  require_same_shape(s.T, s.V, "penalty_gradient_T V");
  require_same_shape(s.T, s.W, "penalty_gradient_T W");
  detail::check_q(p.q);
  Matrix D(C.rows(), C.cols());
  auto c = C.flat(), t = s.T.flat(), u = s.U.flat(), v = s.V.flat(),
       w = s.W.flat();
  auto d = D.flat();
  for (std::size_t k = 0; k < c.size(); ++k)
    d[k] = c[k] - p.gamma * detail::entropy_slope(t[k], p.q) +
           sigma * (3.0 * t[k] - u[k] - v[k] - w[k]);
  return D;
}

/// Gradient of G alone.
inline Matrix objective_gradient(const Matrix &C, const Matrix &T,
                                 const ObjectiveParams &p) {
  require_same_shape(C, T, "objective_gradient");
  detail::check_q(p.q);
  Matrix D(C.rows(), C.cols());
  auto c = C.flat(), t = T.flat();
  auto d = D.flat();
  for (std::size_t k = 0; k < c.size(); ++k)
    d[k] = c[k] - p.gamma * detail::entropy_slope(t[k], p.q);
  return D;
}

} // namespace scotm
