#pragma once

// Conditional independence test on summary statistics: ridge-regularised
// partial cross-covariance in feature space, a Frobenius-norm statistic, and a
// Gamma null matched to its conditional mean and variance. An empty
// conditioning set gives the unconditional test.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "fedcdh/error.hpp"
#include "fedcdh/graph.hpp"
#include "fedcdh/summary.hpp"

namespace fedcdh {

inline constexpr double kDefaultRidge = 1e-3;
inline constexpr double kDegenerateMoment = 1e-14;

struct CITestResult {
  double statistic = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double k_hat = 0.0;
  double theta_hat = 0.0;
  double p_value = 1.0;
  bool independent = true;
};

inline VarSet set_union(const VarSet& a, const VarSet& b) {
  VarSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline VarSet sorted_set(VarSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

namespace detail {

inline bool disjoint(const VarSet& a, const VarSet& b) {
  for (int x : a)
    if (std::find(b.begin(), b.end(), x) != b.end()) return false;
  return true;
}

/// (C_ZZ + gamma I)^{-1} rhs.
inline Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& czz, double gamma, const Eigen::MatrixXd& rhs) {
  Eigen::MatrixXd reg = czz;
  reg.diagonal().array() += gamma;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success) throw numeric_error("ridge system is not positive definite");
  Eigen::MatrixXd sol = llt.solve(rhs);
  if (!sol.allFinite()) throw numeric_error("ridge solve produced non-finite values");
  return sol;
}

inline void check_ridge(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw config_error("ridge parameter must be positive");
}

}  // namespace detail

/// C_{XZ,Y} - C_{XZ,Z} (C_ZZ + gamma I)^{-1} C_{Z,Y}, with X augmented by Z
/// through set summation. Reduces to C_XY for empty Z.
inline Eigen::MatrixXd partial_cov(const GlobalSummary& s, const VarSet& x, const VarSet& y, const VarSet& z,
                                   double gamma) {
  detail::check_ridge(gamma);
  if (x.empty() || y.empty()) throw input_error("X and Y must be nonempty");
  if (!detail::disjoint(x, y) || !detail::disjoint(x, z) || !detail::disjoint(y, z))
    throw input_error("X, Y and Z must be pairwise disjoint");
  if (z.empty()) return centered_cov(s, x, y);
  const VarSet xz = set_union(sorted_set(x), sorted_set(z));
  const Eigen::MatrixXd czz = centered_cov(s, z, z);
  return centered_cov(s, xz, y) - centered_cov(s, xz, z) * detail::ridge_solve(czz, gamma, centered_cov(s, z, y));
}

/// Residual covariance C_AA - C_AZ (C_ZZ + gamma I)^{-1} C_ZA. A may contain
/// members of Z: the augmented side of the test passes A = X u Z.
inline Eigen::MatrixXd conditional_self_cov(const GlobalSummary& s, const VarSet& a, const VarSet& z, double gamma) {
  detail::check_ridge(gamma);
  if (a.empty()) throw input_error("conditioned set must be nonempty");
  const Eigen::MatrixXd caa = centered_cov(s, a, a);
  if (z.empty()) return caa;
  const Eigen::MatrixXd caz = centered_cov(s, a, z);
  Eigen::MatrixXd c = caa - caz * detail::ridge_solve(centered_cov(s, z, z), gamma, caz.transpose());
  return 0.5 * (c + c.transpose());
}

/// Upper tail of Gamma(shape, scale) at t.
inline double gamma_upper_tail(double t, double shape, double scale) {
  if (t <= 0.0) return 1.0;
  return boost::math::gamma_q(shape, t / scale);
}

inline CITestResult test_ci(const GlobalSummary& s, const VarSet& x, const VarSet& y, const VarSet& z,
                            double gamma = kDefaultRidge, double alpha = 0.05) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("significance level must lie in (0, 1)");
  if (x == y) throw input_error("X and Y must differ");
  const Eigen::MatrixXd pc = partial_cov(s, x, y, z, gamma);
  const VarSet xz = set_union(sorted_set(x), sorted_set(z));
  const Eigen::MatrixXd cx = conditional_self_cov(s, xz, z, gamma);
  const Eigen::MatrixXd cy = conditional_self_cov(s, y, z, gamma);

  CITestResult r;
  r.statistic = static_cast<double>(s.n) * pc.squaredNorm();
  r.mean = cx.trace() * cy.trace();
  r.variance = 2.0 * cx.squaredNorm() * cy.squaredNorm();
  if (r.mean <= kDegenerateMoment || r.variance <= kDegenerateMoment) {
    r.p_value = 1.0;
    r.independent = true;
    return r;
  }
  r.k_hat = r.mean * r.mean / r.variance;
  r.theta_hat = r.variance / r.mean;
  r.p_value = std::clamp(gamma_upper_tail(r.statistic, r.k_hat, r.theta_hat), 0.0, 1.0);
  r.independent = r.p_value > alpha;
  return r;
}

inline std::string format_set(const VarSet& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "}";
}

/// "CI X={..} Y={..} Z={..} stat=.. p=.. dec=.." audit line.
inline std::string trace_line(const VarSet& x, const VarSet& y, const VarSet& z, const CITestResult& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, " stat=%.10g p=%.10g dec=%s", r.statistic, r.p_value,
                r.independent ? "indep" : "dep");
  return "CI X=" + format_set(x) + " Y=" + format_set(y) + " Z=" + format_set(z) + buf;
}

}  // namespace fedcdh
