#include "autotaxi/qp.hpp"

#include "autotaxi/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <limits>

namespace autotaxi {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRegularization = 1e-9;

// All inequality rows in the form C z >= d, with bookkeeping back to the
// constraint class each row came from.
struct InequalityRows {
  enum class Kind { kGeneral, kLower, kUpper };
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
  std::vector<Kind> kind;
  std::vector<Eigen::Index> source;
};

InequalityRows stack_inequalities(const QuadProgram& qp) {
  const Eigen::Index n = qp.num_vars();
  std::vector<Eigen::Index> lo, hi;
  for (Eigen::Index i = 0; i < qp.lower.size(); ++i) {
    if (std::isfinite(qp.lower(i))) lo.push_back(i);
  }
  for (Eigen::Index i = 0; i < qp.upper.size(); ++i) {
    if (std::isfinite(qp.upper(i))) hi.push_back(i);
  }
  const Eigen::Index m = qp.A_in.rows() + static_cast<Eigen::Index>(lo.size() + hi.size());
  InequalityRows rows;
  rows.C.setZero(m, n);
  rows.d.resize(m);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < qp.A_in.rows(); ++i, ++r) {
    rows.C.row(r) = qp.A_in.row(i);
    rows.d(r) = qp.b_in(i);
    rows.kind.push_back(InequalityRows::Kind::kGeneral);
    rows.source.push_back(i);
  }
  for (Eigen::Index i : lo) {
    rows.C(r, i) = 1.0;
    rows.d(r) = qp.lower(i);
    rows.kind.push_back(InequalityRows::Kind::kLower);
    rows.source.push_back(i);
    ++r;
  }
  for (Eigen::Index i : hi) {
    rows.C(r, i) = -1.0;
    rows.d(r) = -qp.upper(i);
    rows.kind.push_back(InequalityRows::Kind::kUpper);
    rows.source.push_back(i);
    ++r;
  }
  return rows;
}

double max_violation(const InequalityRows& rows, const Eigen::VectorXd& z) {
  if (rows.d.size() == 0) return 0.0;
  return std::max(0.0, (rows.d - rows.C * z).maxCoeff());
}

struct CoreResult {
  Eigen::VectorXd z;
  Eigen::VectorXd lambda_eq;
  Eigen::VectorXd lambda_in;  // one per inequality row
  QpStatus status = QpStatus::kOptimal;
  int iterations = 0;
};

// Primal active-set iterations from a feasible point. H = L L'.
CoreResult active_set(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::VectorXd& g,
                      const Eigen::MatrixXd& A_eq, const InequalityRows& rows, Eigen::VectorXd z,
                      int max_iterations, const QpOptions& opt) {
  const Eigen::Index n = g.size();
  const Eigen::Index me = A_eq.rows();
  const Eigen::Index mi = rows.C.rows();
  // Y = L^{-1} [A_eq; C]'
  Eigen::MatrixXd Y(n, me + mi);
  if (me > 0) Y.leftCols(me) = llt.matrixL().solve(A_eq.transpose());
  if (mi > 0) Y.rightCols(mi) = llt.matrixL().solve(rows.C.transpose());
  const Eigen::MatrixXd Hfull = llt.reconstructedMatrix();

  std::vector<Eigen::Index> working;  // inequality row indices
  std::vector<char> in_working(static_cast<std::size_t>(mi), 0);

  // Orthonormal basis of the working columns of Y, grown by Gram-Schmidt
  // while seeding the working set with constraints active at z.
  Eigen::MatrixXd basis(n, std::min<Eigen::Index>(n, me + mi));
  Eigen::Index basis_cols = 0;
  auto try_add = [&](const Eigen::VectorXd& y) {
    if (basis_cols >= n) return false;
    Eigen::VectorXd r = y;
    for (int pass = 0; pass < 2; ++pass) {
      r -= basis.leftCols(basis_cols) * (basis.leftCols(basis_cols).transpose() * r);
    }
    const double rn = r.norm();
    if (rn <= 1e-9 * std::max(1.0, y.norm())) return false;
    basis.col(basis_cols++) = r / rn;
    return true;
  };
  for (Eigen::Index k = 0; k < me; ++k) try_add(Y.col(k));
  for (Eigen::Index i = 0; i < mi; ++i) {
    const double slack = rows.C.row(i).dot(z) - rows.d(i);
    if (std::abs(slack) <= opt.feasibility_tol * (1.0 + std::abs(rows.d(i))) &&
        try_add(Y.col(me + i))) {
      working.push_back(i);
      in_working[static_cast<std::size_t>(i)] = 1;
    }
  }

  CoreResult res;
  bool bland = false;
  bool took_full_step = false;
  int degenerate_steps = 0;
  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it + 1;
    const Eigen::VectorXd c = Hfull * z + g;
    const Eigen::VectorXd dt = llt.matrixL().solve(c);
    const Eigen::Index w = me + static_cast<Eigen::Index>(working.size());
    Eigen::MatrixXd Yw(n, w);
    if (me > 0) Yw.leftCols(me) = Y.leftCols(me);
    for (std::size_t k = 0; k < working.size(); ++k) {
      Yw.col(me + static_cast<Eigen::Index>(k)) = Y.col(me + working[k]);
    }
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(w);
    if (w > 0) {
      const Eigen::MatrixXd M = Yw.transpose() * Yw;
      lambda = M.ldlt().solve(Yw.transpose() * dt);
    }
    Eigen::VectorXd rhs = -dt;
    if (w > 0) rhs += Yw * lambda;
    const Eigen::VectorXd p = llt.matrixU().solve(rhs);

    const double step_scale = 1.0 + z.lpNorm<Eigen::Infinity>();
    // A full unblocked step lands on the working-set minimizer; whatever
    // remains of p afterwards is rounding noise.
    if (took_full_step || p.lpNorm<Eigen::Infinity>() <= 1e-12 * step_scale) {
      took_full_step = false;
      // Stationary on the working set: check inequality multipliers.
      Eigen::Index drop = -1;
      double most_negative = -opt.dual_tol;
      for (std::size_t k = 0; k < working.size(); ++k) {
        const double l = lambda(me + static_cast<Eigen::Index>(k));
        if (l < -opt.dual_tol) {
          if (bland) {
            if (drop < 0 || working[k] < working[static_cast<std::size_t>(drop)]) {
              drop = static_cast<Eigen::Index>(k);
            }
          } else if (l < most_negative) {
            most_negative = l;
            drop = static_cast<Eigen::Index>(k);
          }
        }
      }
      if (drop < 0) {
        res.z = z;
        res.lambda_eq = lambda.head(me);
        res.lambda_in = Eigen::VectorXd::Zero(mi);
        for (std::size_t k = 0; k < working.size(); ++k) {
          res.lambda_in(working[k]) = lambda(me + static_cast<Eigen::Index>(k));
        }
        res.status = QpStatus::kOptimal;
        return res;
      }
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = 0;
      working.erase(working.begin() + drop);
      continue;
    }

    // Ratio test over constraints outside the working set.
    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < mi; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      const double cp = rows.C.row(i).dot(p);
      if (cp >= -1e-14 * (1.0 + rows.C.row(i).lpNorm<Eigen::Infinity>())) continue;
      const double ai = std::max(0.0, (rows.d(i) - rows.C.row(i).dot(z)) / cp);
      if (ai < alpha || (bland && ai == alpha && blocking >= 0 && i < blocking)) {
        alpha = ai;
        blocking = i;
      }
    }
    z += alpha * p;
    took_full_step = blocking < 0;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<std::size_t>(blocking)] = 1;
      degenerate_steps = alpha == 0.0 ? degenerate_steps + 1 : 0;
      if (degenerate_steps > 3) bland = true;
    }
  }
  res.z = z;
  res.lambda_eq = Eigen::VectorXd::Zero(me);
  res.lambda_in = Eigen::VectorXd::Zero(mi);
  res.status = QpStatus::kMaxIterations;
  return res;
}

double stationarity(const QuadProgram& qp, const QpSolution& s) {
  Eigen::VectorXd r = qp.H * s.z + qp.g;
  if (qp.A_eq.rows() > 0) r -= qp.A_eq.transpose() * s.y_eq;
  if (qp.A_in.rows() > 0) r -= qp.A_in.transpose() * s.y_in;
  if (s.y_lower.size() > 0) r -= s.y_lower;
  if (s.y_upper.size() > 0) r += s.y_upper;
  return r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
}

}  // namespace

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kSingular: return "singular";
    case QpStatus::kMaxIterations: return "max-iterations";
  }
  return "unknown";
}

void QuadProgram::normalize() {
  const Eigen::Index n = g.size();
  if (H.rows() != n || H.cols() != n) throw InvalidArgument("QuadProgram: H must be n x n");
  if ((H - H.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * (1.0 + H.lpNorm<Eigen::Infinity>())) {
    throw InvalidArgument("QuadProgram: H must be symmetric");
  }
  if (A_eq.size() == 0) A_eq.resize(0, n);
  if (A_in.size() == 0) A_in.resize(0, n);
  if (A_eq.cols() != n || A_eq.rows() != b_eq.size()) {
    throw InvalidArgument("QuadProgram: A_eq/b_eq dimension mismatch");
  }
  if (A_in.cols() != n || A_in.rows() != b_in.size()) {
    throw InvalidArgument("QuadProgram: A_in/b_in dimension mismatch");
  }
  if ((lower.size() != 0 && lower.size() != n) || (upper.size() != 0 && upper.size() != n)) {
    throw InvalidArgument("QuadProgram: bound vectors must be empty or length n");
  }
}

QpSolution solve_eq_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                       const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq) {
  const Eigen::Index n = g.size();
  const Eigen::Index m = A_eq.rows();
  if (H.rows() != n || H.cols() != n || (m > 0 && A_eq.cols() != n) || b_eq.size() != m) {
    throw InvalidArgument("solve_eq_qp: dimension mismatch");
  }
  QpSolution sol;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = H;
  if (m > 0) {
    K.topRightCorner(n, m) = A_eq.transpose();
    K.bottomLeftCorner(m, n) = A_eq;
  }
  Eigen::VectorXd rhs(n + m);
  rhs << -g, b_eq;

  // Symmetric Ruiz equilibration: segments of very different scale (for
  // example polynomial pieces with durations 1 s and 20 s) otherwise leave
  // pivots below the rank threshold.
  Eigen::VectorXd D = Eigen::VectorXd::Ones(n + m);
  Eigen::MatrixXd Ks = K;
  for (int pass = 0; pass < 20; ++pass) {
    Eigen::VectorXd r(n + m);
    for (Eigen::Index i = 0; i < n + m; ++i) {
      const double mx = Ks.row(i).lpNorm<Eigen::Infinity>();
      r(i) = mx > 0.0 ? 1.0 / std::sqrt(mx) : 1.0;
    }
    if ((r.array() - 1.0).abs().maxCoeff() < 1e-3) break;
    Ks = r.asDiagonal() * Ks * r.asDiagonal();
    D = D.cwiseProduct(r);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Ks);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    // H may only be semidefinite on the constraint null space.
    K.topLeftCorner(n, n) += kRegularization * Eigen::MatrixXd::Identity(n, n);
    Ks = D.asDiagonal() * K * D.asDiagonal();
    lu.compute(Ks);
    sol.regularized = true;
    if (!lu.isInvertible()) {
      sol.status = QpStatus::kSingular;
      sol.diagnostic = "KKT matrix is singular (rank " + std::to_string(lu.rank()) + " of " +
                       std::to_string(n + m) + "); constraints are dependent or inconsistent";
      sol.z = Eigen::VectorXd::Zero(n);
      sol.y_eq = Eigen::VectorXd::Zero(m);
      return sol;
    }
  }
  // x = D y with (D K D) y = D rhs; two rounds of iterative refinement
  // against the unregularized system.
  Eigen::MatrixXd K0 = K;
  if (sol.regularized) K0.topLeftCorner(n, n) = H;
  Eigen::VectorXd x = D.cwiseProduct(lu.solve(D.cwiseProduct(rhs)));
  for (int i = 0; i < 2; ++i) x += D.cwiseProduct(lu.solve(D.cwiseProduct(rhs - K0 * x)));

  sol.z = x.head(n);
  sol.y_eq = -x.tail(m);
  sol.y_in.resize(0);
  sol.status = QpStatus::kOptimal;
  const double stat = (H * sol.z + g - (m > 0 ? Eigen::VectorXd(A_eq.transpose() * sol.y_eq)
                                               : Eigen::VectorXd::Zero(n)))
                          .lpNorm<Eigen::Infinity>();
  const double feas = m > 0 ? (A_eq * sol.z - b_eq).lpNorm<Eigen::Infinity>() : 0.0;
  sol.kkt_residual = std::max(stat, feas);
  return sol;
}

QpSolution solve_qp(QuadProgram qp, const std::optional<Eigen::VectorXd>& warm_start,
                    const QpOptions& options) {
  qp.normalize();
  const Eigen::Index n = qp.num_vars();
  QpSolution sol;
  sol.z = Eigen::VectorXd::Zero(n);
  sol.y_eq = Eigen::VectorXd::Zero(qp.A_eq.rows());
  sol.y_in = Eigen::VectorXd::Zero(qp.A_in.rows());
  sol.y_lower = Eigen::VectorXd::Zero(qp.lower.size());
  sol.y_upper = Eigen::VectorXd::Zero(qp.upper.size());

  Eigen::MatrixXd H = qp.H;
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    H += kRegularization * (1.0 + H.diagonal().cwiseAbs().maxCoeff()) *
         Eigen::MatrixXd::Identity(n, n);
    llt.compute(H);
    sol.regularized = true;
    if (llt.info() != Eigen::Success) {
      sol.status = QpStatus::kSingular;
      sol.diagnostic = "H is not positive definite";
      return sol;
    }
  }

  const InequalityRows rows = stack_inequalities(qp);
  const Eigen::Index mi = rows.C.rows();
  const int max_it = options.max_iterations > 0
                         ? options.max_iterations
                         : static_cast<int>(10 * (n + qp.A_eq.rows() + mi) + 20);

  // Drop dependent equality rows; detect inconsistent ones.
  Eigen::MatrixXd A_eq = qp.A_eq;
  Eigen::VectorXd b_eq = qp.b_eq;
  std::vector<Eigen::Index> eq_keep;
  if (A_eq.rows() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A_eq.transpose());
    qr.setThreshold(1e-12);
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = 0; k < qr.rank(); ++k) eq_keep.push_back(perm(k));
    std::sort(eq_keep.begin(), eq_keep.end());
    Eigen::MatrixXd Ak(eq_keep.size(), n);
    Eigen::VectorXd bk(eq_keep.size());
    for (std::size_t k = 0; k < eq_keep.size(); ++k) {
      Ak.row(static_cast<Eigen::Index>(k)) = A_eq.row(eq_keep[k]);
      bk(static_cast<Eigen::Index>(k)) = b_eq(eq_keep[k]);
    }
    A_eq = Ak;
    b_eq = bk;
  }

  // Feasible starting point.
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  if (warm_start && warm_start->size() == n && warm_start->allFinite()) z = *warm_start;
  if (A_eq.rows() > 0) {
    const Eigen::VectorXd r = A_eq * z - b_eq;
    z -= A_eq.transpose() * (A_eq * A_eq.transpose()).ldlt().solve(r);
    if ((qp.A_eq * z - qp.b_eq).lpNorm<Eigen::Infinity>() > 1e-8 * (1.0 + qp.b_eq.lpNorm<Eigen::Infinity>())) {
      sol.status = QpStatus::kInfeasible;
      sol.diagnostic = "equality constraints are inconsistent";
      sol.z = z;
      return sol;
    }
  }
  const double violation = max_violation(rows, z);
  if (violation > options.feasibility_tol) {
    // Elastic phase 1 over (z, t): min 1/2 (|z - z0|^2 + t^2) + M t
    //   s.t. A_eq z = b_eq, C z + t >= d, t >= 0.
    // Exact penalty: t = 0 at the optimum once M exceeds the projection
    // multipliers, so M is raised until that holds or gives up.
    Eigen::LLT<Eigen::MatrixXd> llt1(Eigen::MatrixXd::Identity(n + 1, n + 1));
    Eigen::MatrixXd A1 = Eigen::MatrixXd::Zero(A_eq.rows(), n + 1);
    A1.leftCols(n) = A_eq;
    InequalityRows rows1;
    rows1.C.setZero(mi + 1, n + 1);
    rows1.C.topLeftCorner(mi, n) = rows.C;
    rows1.C.block(0, n, mi, 1).setOnes();
    rows1.C(mi, n) = 1.0;
    rows1.d.resize(mi + 1);
    rows1.d.head(mi) = rows.d;
    rows1.d(mi) = 0.0;
    const double scale = 1.0 + rows.d.lpNorm<Eigen::Infinity>() + z.lpNorm<Eigen::Infinity>();
    double penalty = 1e3 * scale;
    CoreResult p1;
    for (int round = 0; round < 4; ++round, penalty *= 1e3) {
      Eigen::VectorXd g1 = Eigen::VectorXd::Zero(n + 1);
      g1.head(n) = -z;
      g1(n) = penalty;
      Eigen::VectorXd z1(n + 1);
      z1.head(n) = z;
      z1(n) = violation;
      p1 = active_set(llt1, g1, A1, rows1, z1, max_it, options);
      sol.iterations += p1.iterations;
      if (p1.status != QpStatus::kOptimal || p1.z(n) <= options.feasibility_tol) break;
    }
    if (p1.status != QpStatus::kOptimal || p1.z(n) > options.feasibility_tol) {
      sol.status = p1.status == QpStatus::kOptimal ? QpStatus::kInfeasible : p1.status;
      char buf[96];
      std::snprintf(buf, sizeof buf, "%.3e", p1.z(n));
      sol.diagnostic = "no point satisfies the inequality constraints (phase-1 violation " +
                       std::string(buf) + ")";
      sol.z = p1.z.head(n);
      return sol;
    }
    z = p1.z.head(n);
    // Tiny residual violation from phase 1 is projected out by the ratio test.
  }

  const CoreResult core = active_set(llt, qp.g, A_eq, rows, z, max_it, options);
  sol.iterations += core.iterations;
  sol.z = core.z;
  sol.status = core.status;
  if (core.status != QpStatus::kOptimal) {
    sol.diagnostic = "iteration limit reached";
    return sol;
  }
  for (std::size_t k = 0; k < eq_keep.size(); ++k) {
    sol.y_eq(eq_keep[k]) = core.lambda_eq(static_cast<Eigen::Index>(k));
  }
  for (Eigen::Index i = 0; i < mi; ++i) {
    const double l = std::max(0.0, core.lambda_in(i));
    switch (rows.kind[static_cast<std::size_t>(i)]) {
      case InequalityRows::Kind::kGeneral: sol.y_in(rows.source[static_cast<std::size_t>(i)]) = l; break;
      case InequalityRows::Kind::kLower: sol.y_lower(rows.source[static_cast<std::size_t>(i)]) = l; break;
      case InequalityRows::Kind::kUpper: sol.y_upper(rows.source[static_cast<std::size_t>(i)]) = l; break;
    }
  }
  double comp = 0.0;
  for (Eigen::Index i = 0; i < mi; ++i) {
    comp = std::max(comp, std::abs(core.lambda_in(i) * (rows.C.row(i).dot(sol.z) - rows.d(i))));
  }
  const double feas_eq =
      qp.A_eq.rows() > 0 ? (qp.A_eq * sol.z - qp.b_eq).lpNorm<Eigen::Infinity>() : 0.0;
  sol.kkt_residual = std::max({stationarity(qp, sol), feas_eq, max_violation(rows, sol.z), comp});
  return sol;
}

}  // namespace autotaxi
