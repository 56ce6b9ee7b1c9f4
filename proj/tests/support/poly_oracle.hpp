#pragma once

// Reference computations for piecewise polynomials, written directly from
// the definitions and independent of the library's spline code.

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <vector>
#include <functional>

namespace autotaxi::testing {

/// d-th derivative of sum_i a_i t^i at t, by term-wise differentiation.
inline double poly_derivative(const Eigen::VectorXd& a, double t, int d) {
  double sum = 0.0;
  for (Eigen::Index i = d; i < a.size(); ++i) {
    double c = 1.0;
    for (int k = 0; k < d; ++k) c *= static_cast<double>(i - k);
    sum += c * a(i) * std::pow(t, static_cast<double>(i - d));
  }
  return sum;
}

namespace detail {
inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                           double fm, double fb, double whole, double tol, double floor,
                           int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * std::max(tol, floor)) {
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, floor, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, floor, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson quadrature with Richardson correction. `rel_tol` is
/// relative to a coarse estimate of the integral of |f|.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double rel_tol) {
  double scale = 0.0;
  for (int i = 0; i <= 64; ++i) scale += std::abs(f(a + (b - a) * i / 64.0));
  scale = scale / 65.0 * (b - a);
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  // Below ~1e-15 of the magnitude only rounding noise is left to resolve.
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, rel_tol * scale, 1e-15 * scale, 30);
}

/// Rows of every linear condition a piecewise spline with given segment
/// durations must meet (interpolation, boundary derivatives of order
/// 1..r-1, interior continuity of order 1..r-1), over stacked real-time
/// monomial coefficients of one axis.
inline Eigen::MatrixXd spline_constraint_matrix(const std::vector<double>& durations, int np,
                                                int r) {
  const int m = static_cast<int>(durations.size());
  std::vector<Eigen::RowVectorXd> rows;
  auto row_at = [&](int seg, double t, int d) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(m * np);
    for (int i = d; i < np; ++i) {
      double c = 1.0;
      for (int k = 0; k < d; ++k) c *= static_cast<double>(i - k);
      row(seg * np + i) = c * std::pow(t, static_cast<double>(i - d));
    }
    return row;
  };
  for (int k = 0; k < m; ++k) {
    rows.push_back(row_at(k, 0.0, 0));
    rows.push_back(row_at(k, durations[static_cast<std::size_t>(k)], 0));
  }
  for (int d = 1; d < r; ++d) {
    rows.push_back(row_at(0, 0.0, d));
    rows.push_back(row_at(m - 1, durations.back(), d));
  }
  for (int k = 0; k + 1 < m; ++k) {
    for (int d = 1; d < r; ++d) {
      rows.push_back(row_at(k, durations[static_cast<std::size_t>(k)], d) - row_at(k + 1, 0.0, d));
    }
  }
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), m * np);
  for (std::size_t i = 0; i < rows.size(); ++i) A.row(static_cast<Eigen::Index>(i)) = rows[i];
  return A;
}

/// Orthonormal basis of the null space of A.
inline Eigen::MatrixXd null_space(const Eigen::MatrixXd& A) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.transpose());
  const Eigen::Index rank = qr.rank();
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.cols(), A.cols());
  return Q.rightCols(A.cols() - rank);
}

}  // namespace autotaxi::testing
