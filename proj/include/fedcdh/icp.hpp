#pragma once

// Independent-change direction scores between two changing modules, built
// only from covariance blocks against the surrogate variable.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include <Eigen/Dense>

#include "fedcdh/citest.hpp"
#include "fedcdh/error.hpp"
#include "fedcdh/summary.hpp"

namespace fedcdh {

inline constexpr double kDefaultTieTolerance = 1e-9;
/// tr C*_A at or below this fraction of tr C_AA counts as "not changing".
inline constexpr double kUnchangedTraceRatio = 1e-12;

enum class Direction { Forward, Backward, Tie };  // X->Y, Y->X, undecided

struct IcpScore {
  double delta_xy = 0.0;
  double delta_yx = 0.0;
  Direction decision = Direction::Tie;
};

namespace detail {

/// (C_UU + gamma I)^{-1} C_UU (C_UU + gamma I)^{-1}, the inner factor shared by
/// every proxy covariance.
inline Eigen::MatrixXd surrogate_kernel(const GlobalSummary& s, double gamma) {
  const VarSet u{s.surrogate()};
  const Eigen::MatrixXd cuu = centered_cov(s, u, u);
  const Eigen::MatrixXd left = ridge_solve(cuu, gamma, cuu);
  // left = R C_UU; the product R C_UU R is symmetric, so solve once more from the right.
  return ridge_solve(cuu, gamma, left.transpose()).transpose();
}

inline void check_observed(const GlobalSummary& s, const VarSet& a) {
  if (a.empty()) throw input_error("proxy set must be nonempty");
  for (int v : a)
    if (v == s.surrogate()) throw input_error("proxy sets cannot contain the surrogate");
}

}  // namespace detail

/// C*_A = C_AU R C_UU R C_UA with R = (C_UU + gamma I)^{-1}.
inline Eigen::MatrixXd proxy_self(const GlobalSummary& s, const VarSet& a, double gamma) {
  detail::check_ridge(gamma);
  detail::check_observed(s, a);
  const VarSet u{s.surrogate()};
  const Eigen::MatrixXd cau = centered_cov(s, a, u);
  Eigen::MatrixXd c = cau * detail::surrogate_kernel(s, gamma) * cau.transpose();
  return 0.5 * (c + c.transpose());
}

/// C*_{X, joint} = C_XU R C_UU R C_{U, joint}; joint is the summed pair set.
inline Eigen::MatrixXd proxy_cross(const GlobalSummary& s, const VarSet& x, const VarSet& joint, double gamma) {
  detail::check_ridge(gamma);
  detail::check_observed(s, x);
  detail::check_observed(s, joint);
  const VarSet u{s.surrogate()};
  return centered_cov(s, x, u) * detail::surrogate_kernel(s, gamma) * centered_cov(s, u, joint);
}

/// Normalised dependence between the changes of P(X) and P(Y | X) and the
/// reverse; the smaller score marks the causal direction.
inline IcpScore score_direction(const GlobalSummary& s, int x, int y, double gamma = kDefaultRidge,
                                double tie_tol = kDefaultTieTolerance) {
  if (x == y) throw input_error("score_direction needs two distinct variables");
  const VarSet vx{x}, vy{y};
  const VarSet joint = sorted_set({x, y});
  const Eigen::MatrixXd cx = proxy_self(s, vx, gamma);
  const Eigen::MatrixXd cy = proxy_self(s, vy, gamma);
  const Eigen::MatrixXd cj = proxy_self(s, joint, gamma);

  auto require_change = [&](const Eigen::MatrixXd& proxy, const VarSet& set, const char* what) {
    const double own = centered_cov(s, set, set).trace();
    if (!(proxy.trace() > kUnchangedTraceRatio * std::max(own, 1e-300)))
      throw precondition_error(std::string("module of ") + what + " " + format_set(set) +
                               " does not change across domains; skip the direction score");
  };
  require_change(cx, vx, "X");
  require_change(cy, vy, "Y");
  require_change(cj, joint, "pair");

  IcpScore r;
  r.delta_xy = proxy_cross(s, vx, joint, gamma).squaredNorm() / (cx.trace() * cj.trace());
  r.delta_yx = proxy_cross(s, vy, joint, gamma).squaredNorm() / (cy.trace() * cj.trace());
  const double scale = std::max(r.delta_xy, r.delta_yx);
  if (std::abs(r.delta_xy - r.delta_yx) <= tie_tol * scale) r.decision = Direction::Tie;
  else r.decision = r.delta_xy < r.delta_yx ? Direction::Forward : Direction::Backward;
  return r;
}

inline std::string trace_line(int x, int y, const IcpScore& r) {
  const char* dec = r.decision == Direction::Forward ? "X->Y" : r.decision == Direction::Backward ? "Y->X" : "tie";
  char buf[160];
  std::snprintf(buf, sizeof buf, "ICP X=%d Y=%d dxy=%.10g dyx=%.10g dec=%s", x, y, r.delta_xy, r.delta_yx, dec);
  return buf;
}

}  // namespace fedcdh
