#pragma once

// Independent first-order optimality check for QuadProgram solutions. It
// recomputes every residual from the problem data and the reported primal
// and dual vectors; it shares no code with the solver.

#include "autotaxi/qp.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace autotaxi::testing {

struct KktReport {
  double stationarity = 0.0;
  double primal = 0.0;
  double min_dual = 0.0;
  double complementarity = 0.0;

  bool passes(double stat_tol = 1e-6, double primal_tol = 1e-6, double dual_tol = 1e-8,
              double comp_tol = 1e-6) const {
    return stationarity <= stat_tol && primal <= primal_tol && min_dual >= -dual_tol &&
           complementarity <= comp_tol;
  }
  std::string str() const {
    return "stat=" + std::to_string(stationarity) + " primal=" + std::to_string(primal) +
           " min_dual=" + std::to_string(min_dual) + " comp=" + std::to_string(complementarity);
  }
};

inline KktReport check_kkt(const QuadProgram& qp, const QpSolution& s) {
  const Eigen::Index n = qp.g.size();
  KktReport r;
  Eigen::VectorXd grad = qp.H * s.z + qp.g;
  for (Eigen::Index i = 0; i < qp.A_eq.rows(); ++i) grad -= s.y_eq(i) * qp.A_eq.row(i).transpose();
  for (Eigen::Index i = 0; i < qp.A_in.rows(); ++i) {
    grad -= s.y_in(i) * qp.A_in.row(i).transpose();
    const double slack = qp.A_in.row(i).dot(s.z) - qp.b_in(i);
    r.primal = std::max(r.primal, -slack);
    r.min_dual = std::min(r.min_dual, s.y_in(i));
    r.complementarity = std::max(r.complementarity, std::abs(s.y_in(i) * slack));
  }
  for (Eigen::Index i = 0; i < qp.A_eq.rows(); ++i) {
    r.primal = std::max(r.primal, std::abs(qp.A_eq.row(i).dot(s.z) - qp.b_eq(i)));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (qp.lower.size() == n && std::isfinite(qp.lower(i))) {
      grad(i) -= s.y_lower(i);
      const double slack = s.z(i) - qp.lower(i);
      r.primal = std::max(r.primal, -slack);
      r.min_dual = std::min(r.min_dual, s.y_lower(i));
      r.complementarity = std::max(r.complementarity, std::abs(s.y_lower(i) * slack));
    }
    if (qp.upper.size() == n && std::isfinite(qp.upper(i))) {
      grad(i) += s.y_upper(i);
      const double slack = qp.upper(i) - s.z(i);
      r.primal = std::max(r.primal, -slack);
      r.min_dual = std::min(r.min_dual, s.y_upper(i));
      r.complementarity = std::max(r.complementarity, std::abs(s.y_upper(i) * slack));
    }
  }
  r.stationarity = grad.lpNorm<Eigen::Infinity>();
  return r;
}

/// Exhaustive active-set enumeration for small inequality-constrained QPs
/// (no equalities, no bounds): solve the equality problem for every subset of
/// inequalities treated as active, keep the primal- and dual-feasible one.
inline bool brute_force_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                           const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           Eigen::VectorXd& z_out) {
  const Eigen::Index n = g.size();
  const Eigen::Index m = A.rows();
  bool found = false;
  double best = 0.0;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (mask & (1u << i)) act.push_back(i);
    }
    const Eigen::Index k = static_cast<Eigen::Index>(act.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = H;
    rhs.head(n) = -g;
    for (Eigen::Index j = 0; j < k; ++j) {
      K.block(0, n + j, n, 1) = -A.row(act[j]).transpose();
      K.block(n + j, 0, 1, n) = A.row(act[j]);
      rhs(n + j) = b(act[j]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd z = sol.head(n);
    if (((A * z - b).array() < -1e-9).any()) continue;
    if (k > 0 && (sol.tail(k).array() < -1e-9).any()) continue;
    const double f = 0.5 * z.dot(H * z) + g.dot(z);
    if (!found || f < best) {
      found = true;
      best = f;
      z_out = z;
    }
  }
  return found;
}

}  // namespace autotaxi::testing
