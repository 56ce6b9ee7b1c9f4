#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace autotaxi {

/// Dense convex quadratic program
///
///   minimize    1/2 z'Hz + g'z
///   subject to  A_eq z  = b_eq
///               A_in z >= b_in
///               lower <= z <= upper   (entries may be +-infinity)
///
/// Multipliers follow the convention
///   Hz + g = A_eq' y_eq + A_in' y_in + y_lower - y_upper,
/// with y_in, y_lower, y_upper >= 0.
struct QuadProgram {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;
  Eigen::VectorXd lower;  ///< empty for no lower bounds
  Eigen::VectorXd upper;  ///< empty for no upper bounds

  Eigen::Index num_vars() const { return g.size(); }
  /// Fills empty constraint blocks with correctly sized zero-row matrices and
  /// checks dimensions and symmetry. Throws InvalidArgument.
  void normalize();
};

enum class QpStatus { kOptimal, kInfeasible, kSingular, kMaxIterations };

const char* to_string(QpStatus s);

struct QpSolution {
  Eigen::VectorXd z;
  Eigen::VectorXd y_eq;
  Eigen::VectorXd y_in;
  Eigen::VectorXd y_lower;
  Eigen::VectorXd y_upper;
  QpStatus status = QpStatus::kSingular;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool regularized = false;
  std::string diagnostic;

  bool ok() const { return status == QpStatus::kOptimal; }
};

struct QpOptions {
  int max_iterations = 0;  ///< 0 selects 10 * (variables + constraints)
  double feasibility_tol = 1e-9;
  double dual_tol = 1e-10;
};

/// Equality-constrained QP through a factorization of the full KKT matrix.
/// Returns kSingular when the KKT matrix is rank deficient.
QpSolution solve_eq_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                       const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq);

/// Primal active-set solver for strictly convex QPs. A warm start, when
/// given and feasible, seeds the initial point and working set; otherwise an
/// elastic phase-1 problem finds a feasible point.
QpSolution solve_qp(QuadProgram qp, const std::optional<Eigen::VectorXd>& warm_start = std::nullopt,
                    const QpOptions& options = {});

}  // namespace autotaxi
