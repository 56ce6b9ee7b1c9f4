#include "autotaxi/mpc.hpp"

#include "autotaxi/errors.hpp"
#include "autotaxi/qp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace autotaxi {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Weight of the l1 shooting-defect term in the merit function.
constexpr double kDefectPenalty = 1e3;

bool is_spd(const Eigen::MatrixXd& M) {
  if ((M - M.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * (1.0 + M.lpNorm<Eigen::Infinity>())) {
    return false;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  return llt.info() == Eigen::Success;
}

// a - b with the heading component wrapped.
Eigen::Vector4d state_diff(const AircraftState& a, const AircraftState& b) {
  Eigen::Vector4d d = a.vec() - b.vec();
  d(2) = wrap_angle(d(2));
  return d;
}

AircraftState state_add(const AircraftState& x, const Eigen::Vector4d& d) {
  return {x.px + d(0), x.py + d(1), wrap_angle(x.theta + d(2)), x.v + d(3)};
}

std::vector<AircraftState> rollout(const AircraftState& x0, std::span<const ControlInput> u,
                                   double dt, double L) {
  std::vector<AircraftState> xs;
  xs.reserve(u.size() + 1);
  xs.push_back(x0);
  for (const ControlInput& ui : u) xs.push_back(step_dynamics(xs.back(), ui, dt, L));
  return xs;
}

// Slack each CBF row needs on the given states (N x m).
Eigen::MatrixXd required_slack(const NlpDescription& nlp, std::span<const AircraftState> xs) {
  const int N = nlp.config.horizon;
  const int m = static_cast<int>(nlp.obstacles.size());
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(N, m);
  for (int j = 0; j < m; ++j) {
    const auto& ob = nlp.obstacles[static_cast<std::size_t>(j)];
    for (int l = 0; l < N; ++l) {
      const double h0 = cbf_h(xs[static_cast<std::size_t>(l)], ob.positions[static_cast<std::size_t>(l)],
                              ob.radius, nlp.config.cbf.d_safe);
      const double h1 = cbf_h(xs[static_cast<std::size_t>(l + 1)],
                              ob.positions[static_cast<std::size_t>(l + 1)], ob.radius,
                              nlp.config.cbf.d_safe);
      s(l, j) = std::max(0.0, -cbf_residual(h1, h0, nlp.config.cbf.gamma));
    }
  }
  return s;
}

double speed_violation(const NlpDescription& nlp, std::span<const AircraftState> xs) {
  double v = 0.0;
  for (std::size_t l = 1; l < xs.size(); ++l) {
    v += std::max(0.0, nlp.config.speed_limits.v_min - xs[l].v) +
         std::max(0.0, xs[l].v - nlp.config.speed_limits.v_max);
  }
  return v;
}

double merit(const NlpDescription& nlp, std::span<const AircraftState> xs,
             std::span<const ControlInput> us) {
  const double dt = nlp.config.dt;
  const double L = nlp.config.wheelbase;
  double defects = 0.0;
  for (std::size_t l = 0; l < us.size(); ++l) {
    defects += state_diff(step_dynamics(xs[l], us[l], dt, L), xs[l + 1]).lpNorm<1>();
  }
  return nlp_cost(nlp, xs, us, required_slack(nlp, xs)) +
         kDefectPenalty * (defects + speed_violation(nlp, xs));
}

}  // namespace

void CbfParams::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("cbf gamma must lie in (0, 1]");
  if (!(d_safe >= 0.0)) throw InvalidArgument("cbf d_safe must be nonnegative");
}

void MpcWeights::validate() const {
  if (!is_spd(Q)) throw InvalidArgument("weight Q must be symmetric positive definite");
  if (!is_spd(R)) throw InvalidArgument("weight R must be symmetric positive definite");
  if (!is_spd(P)) throw InvalidArgument("weight P must be symmetric positive definite");
}

void MpcConfig::validate() const {
  if (horizon < 2) throw InvalidArgument("MPC horizon must be at least 2");
  if (!(dt > 0.0)) throw InvalidArgument("MPC dt must be positive");
  if (!(wheelbase > 0.0)) throw InvalidArgument("wheelbase must be positive");
  if (!(sqp.slack_penalty > 0.0)) throw InvalidArgument("slack penalty must be positive");
  if (!(sqp.slack_linear_penalty >= 0.0)) {
    throw InvalidArgument("linear slack penalty must be nonnegative");
  }
  if (sqp.max_iters < 1) throw InvalidArgument("SQP needs at least one iteration");
  if (!(speed_limits.v_max >= speed_limits.v_min)) throw InvalidArgument("empty speed range");
  weights.validate();
  cbf.validate();
  bounds.validate();
}

ObstaclePrediction predict_obstacle(const Obstacle& o, int horizon, double dt) {
  ObstaclePrediction p;
  p.radius = o.radius;
  p.positions.reserve(static_cast<std::size_t>(horizon) + 1);
  p.positions.push_back(o.position);
  for (const Vec2& q : propagate_obstacle(o, horizon, dt)) p.positions.push_back(q);
  return p;
}

double cbf_h(const AircraftState& x, const Vec2& o_pos, double r, double d_safe) {
  const double R = r + d_safe;
  return (x.position() - o_pos).squaredNorm() - R * R;
}

double cbf_residual(double h_next, double h_now, double gamma) {
  return h_next - (1.0 - gamma) * h_now;
}

double stage_cost(const AircraftState& x, const ReferenceState& x_ref, const ControlInput& u,
                  const ControlInput& u_prev, const MpcWeights& w) {
  const Eigen::Vector4d e = state_diff(x, x_ref);
  const Eigen::Vector2d du = u.vec() - u_prev.vec();
  return e.dot(w.Q * e) + du.dot(w.R * du);
}

NlpDescription build_nlp(const AircraftState& x0, std::span<const ReferenceState> reference,
                         std::span<const ObstaclePrediction> obstacles,
                         const ControlInput& u_prev, const MpcConfig& config) {
  config.validate();
  if (!x0.finite()) throw InvalidState("MPC initial state is not finite");
  const int N = config.horizon;
  if (static_cast<int>(reference.size()) != N + 1) {
    throw InvalidArgument("reference window must hold horizon + 1 states");
  }
  for (const auto& ob : obstacles) {
    if (static_cast<int>(ob.positions.size()) < N + 1) {
      throw InvalidArgument("obstacle prediction shorter than the horizon");
    }
    if (!(ob.radius > 0.0)) throw InvalidArgument("obstacle radius must be positive");
  }
  NlpDescription nlp;
  nlp.x0 = x0;
  nlp.u_prev = u_prev;
  nlp.reference.assign(reference.begin(), reference.end());
  nlp.obstacles.assign(obstacles.begin(), obstacles.end());
  nlp.config = config;
  const int m = static_cast<int>(obstacles.size());
  nlp.num_inputs = 2 * N;
  nlp.num_states = 4 * N;
  nlp.num_dynamics_rows = 4 * N;
  nlp.num_cbf_rows = N * m;
  nlp.num_slacks = N * m;
  nlp.num_speed_rows = 2 * N;
  nlp.has_terminal_cost = true;
  return nlp;
}

double nlp_cost(const NlpDescription& nlp, std::span<const AircraftState> states,
                std::span<const ControlInput> inputs, const Eigen::MatrixXd& slack) {
  const int N = nlp.config.horizon;
  const MpcWeights& w = nlp.config.weights;
  double J = 0.0;
  ControlInput prev = nlp.u_prev;
  for (int l = 0; l < N; ++l) {
    J += stage_cost(states[static_cast<std::size_t>(l)], nlp.reference[static_cast<std::size_t>(l)],
                    inputs[static_cast<std::size_t>(l)], prev, w);
    prev = inputs[static_cast<std::size_t>(l)];
  }
  const Eigen::Vector4d eN = state_diff(states[static_cast<std::size_t>(N)],
                                        nlp.reference[static_cast<std::size_t>(N)]);
  J += eN.dot(w.P * eN);
  J += nlp.config.sqp.slack_penalty * slack.squaredNorm() +
       nlp.config.sqp.slack_linear_penalty * slack.sum();
  return J;
}

const char* to_string(MpcStatus s) { return s == MpcStatus::kOk ? "ok" : "failed"; }

MpcSolution solve_mpc(const NlpDescription& nlp,
                      const std::optional<std::vector<ControlInput>>& warm_start) {
  const MpcConfig& cfg = nlp.config;
  const int N = cfg.horizon;
  const int m = static_cast<int>(nlp.obstacles.size());
  const double dt = cfg.dt;
  const double L = cfg.wheelbase;
  const double gamma = cfg.cbf.gamma;
  const double d_safe = cfg.cbf.d_safe;
  const int nu = 2 * N;
  const int nz = nu + N * m;

  std::vector<ControlInput> U(static_cast<std::size_t>(N));
  if (warm_start && static_cast<int>(warm_start->size()) == N) {
    for (int l = 0; l < N; ++l) U[l] = clamp_input((*warm_start)[l], cfg.bounds);
  }
  std::vector<AircraftState> X = rollout(nlp.x0, U, dt, L);

  MpcSolution sol;
  sol.status = MpcStatus::kOk;
  double current_merit = merit(nlp, X, U);

  // Input-difference operator: (D u)_l = u_l - u_{l-1}, u_{-1} = u_prev.
  Eigen::MatrixXd Rt = Eigen::MatrixXd::Zero(nu, nu);
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(nu, nu);
  for (int l = 0; l < N; ++l) {
    Rt.block(2 * l, 2 * l, 2, 2) = cfg.weights.R;
    if (l > 0) D.block(2 * l, 2 * (l - 1), 2, 2) = -Eigen::Matrix2d::Identity();
  }
  const Eigen::MatrixXd DtRD = D.transpose() * Rt * D;

  std::vector<Eigen::MatrixXd> S(static_cast<std::size_t>(N + 1), Eigen::MatrixXd::Zero(4, nu));
  std::vector<Eigen::Vector4d> e(static_cast<std::size_t>(N + 1), Eigen::Vector4d::Zero());

  for (int it = 0; it < cfg.sqp.max_iters; ++it) {
    sol.sqp_iterations = it + 1;
    // Linearize the shooting constraints: dx_{l+1} = A dx_l + B du_l + c_l.
    for (int l = 0; l < N; ++l) {
      const auto J = dynamics_jacobians(X[l], U[l], dt, L);
      const Eigen::Vector4d c = state_diff(step_dynamics(X[l], U[l], dt, L), X[l + 1]);
      S[l + 1] = J.A * S[l];
      S[l + 1].block(0, 2 * l, 4, 2) += J.B;
      e[l + 1] = J.A * e[l] + c;
    }

    QuadProgram qp;
    qp.H = Eigen::MatrixXd::Zero(nz, nz);
    qp.g = Eigen::VectorXd::Zero(nz);
    Eigen::MatrixXd Huu = 2.0 * DtRD;
    Eigen::VectorXd gu = Eigen::VectorXd::Zero(nu);
    for (int l = 1; l <= N; ++l) {
      const Eigen::Matrix4d& W = l == N ? cfg.weights.P : cfg.weights.Q;
      const Eigen::Vector4d err = state_diff(X[l], nlp.reference[l]) + e[l];
      Huu += 2.0 * S[l].transpose() * W * S[l];
      gu += 2.0 * S[l].transpose() * (W * err);
    }
    Eigen::VectorXd r0(nu);
    for (int l = 0; l < N; ++l) {
      const ControlInput prev = l == 0 ? nlp.u_prev : U[l - 1];
      r0.segment<2>(2 * l) = U[l].vec() - prev.vec();
    }
    gu += 2.0 * D.transpose() * Rt * r0;
    qp.H.topLeftCorner(nu, nu) = 0.5 * (Huu + Huu.transpose());
    qp.g.head(nu) = gu;
    if (m > 0) {
      qp.H.bottomRightCorner(N * m, N * m) =
          2.0 * cfg.sqp.slack_penalty * Eigen::MatrixXd::Identity(N * m, N * m);
      qp.g.tail(N * m).setConstant(cfg.sqp.slack_linear_penalty);
    }

    qp.lower = Eigen::VectorXd::Zero(nz);
    qp.upper = Eigen::VectorXd::Constant(nz, kInf);
    for (int l = 0; l < N; ++l) {
      qp.lower(2 * l) = -cfg.bounds.phi_max - U[l].phi;
      qp.upper(2 * l) = cfg.bounds.phi_max - U[l].phi;
      qp.lower(2 * l + 1) = -cfg.bounds.beta_max - U[l].beta;
      qp.upper(2 * l + 1) = cfg.bounds.beta_max - U[l].beta;
    }

    const int rows = 2 * N + N * m;
    qp.A_in = Eigen::MatrixXd::Zero(rows, nz);
    qp.b_in = Eigen::VectorXd::Zero(rows);
    int row = 0;
    for (int l = 1; l <= N; ++l) {
      const double v_lin = X[l].v + e[l](3);
      qp.A_in.row(row).head(nu) = S[l].row(3);
      qp.b_in(row++) = cfg.speed_limits.v_min - v_lin;
      qp.A_in.row(row).head(nu) = -S[l].row(3);
      qp.b_in(row++) = v_lin - cfg.speed_limits.v_max;
    }
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(nz);
    for (int j = 0; j < m; ++j) {
      const auto& ob = nlp.obstacles[static_cast<std::size_t>(j)];
      for (int l = 0; l < N; ++l) {
        // h(x_{l+1}) - (1 - gamma) h(x_l) + s >= 0, linearized in du.
        const Vec2 p0 = X[l].position() + e[l].head<2>();
        const Vec2 p1 = X[l + 1].position() + e[l + 1].head<2>();
        const Vec2 o0 = ob.positions[static_cast<std::size_t>(l)];
        const Vec2 o1 = ob.positions[static_cast<std::size_t>(l + 1)];
        const double R2 = (ob.radius + d_safe) * (ob.radius + d_safe);
        const double h0 = (p0 - o0).squaredNorm() - R2;
        const double h1 = (p1 - o1).squaredNorm() - R2;
        Eigen::RowVectorXd a = 2.0 * (p1 - o1).transpose() * S[l + 1].topRows(2);
        if (l > 0) a -= (1.0 - gamma) * 2.0 * (p0 - o0).transpose() * S[l].topRows(2);
        const int si = nu + j * N + l;
        qp.A_in.row(row).head(nu) = a;
        qp.A_in(row, si) = 1.0;
        qp.b_in(row) = -(h1 - (1.0 - gamma) * h0);
        z0(si) = std::max(0.0, qp.b_in(row));
        ++row;
      }
    }

    const QpSolution qs = solve_qp(qp, z0);
    if (!qs.ok()) {
      if (it == 0) {
        sol.status = MpcStatus::kFailed;
        sol.diagnostic = std::string("QP subproblem ") + to_string(qs.status) +
                         (qs.diagnostic.empty() ? "" : ": " + qs.diagnostic);
        break;
      }
      break;
    }
    const Eigen::VectorXd du = qs.z.head(nu);

    // Backtracking on the merit function.
    double alpha = 1.0;
    bool accepted = false;
    std::vector<ControlInput> U_try(U.size());
    std::vector<AircraftState> X_try(X.size());
    for (int ls = 0; ls < 8; ++ls, alpha *= 0.5) {
      for (int l = 0; l < N; ++l) {
        U_try[l] = clamp_input(ControlInput::from_vec(U[l].vec() + alpha * du.segment<2>(2 * l)),
                             cfg.bounds);
      }
      X_try[0] = nlp.x0;
      for (int l = 1; l <= N; ++l) {
        X_try[l] = state_add(X[l], alpha * (S[l] * du + e[l]));
      }
      const double mt = merit(nlp, X_try, U_try);
      if (mt < current_merit) {
        current_merit = mt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    U = U_try;
    X = X_try;
    if (alpha * du.lpNorm<Eigen::Infinity>() <= cfg.sqp.step_tol) break;
  }

  sol.inputs = U;
  sol.states = rollout(nlp.x0, U, dt, L);
  sol.slack = required_slack(nlp, sol.states);
  sol.cost = nlp_cost(nlp, sol.states, sol.inputs, sol.slack);
  sol.min_h = kInf;
  for (const auto& ob : nlp.obstacles) {
    for (int l = 0; l <= N; ++l) {
      sol.min_h = std::min(sol.min_h, cbf_h(sol.states[l], ob.positions[l], ob.radius, d_safe));
    }
  }
  return sol;
}

std::vector<ReferenceState> reference_window(const PolySpline& spline, double t_now, int horizon,
                                             double dt) {
  std::vector<ReferenceState> r;
  r.reserve(static_cast<std::size_t>(horizon) + 1);
  for (int l = 0; l <= horizon; ++l) r.push_back(sample_reference(spline, t_now + l * dt));
  return r;
}

MpcSolution solve_mpc(const AircraftState& x0, const PolySpline& spline, double t_now,
                      std::span<const Obstacle> obstacles, const MpcConfig& config,
                      const std::optional<std::vector<ControlInput>>& warm_start) {
  std::vector<ObstaclePrediction> preds;
  for (const auto& o : obstacles) preds.push_back(predict_obstacle(o, config.horizon, config.dt));
  const auto ref = reference_window(spline, t_now, config.horizon, config.dt);
  return solve_mpc(build_nlp(x0, ref, preds, ControlInput{}, config), warm_start);
}

ControlInput braking_fallback(const InputBounds& bounds) { return {0.0, -bounds.beta_max}; }

MpcController::MpcController(MpcConfig config) : config_(std::move(config)) {
  config_.validate();
}

void MpcController::reset() {
  warm_.reset();
  last_applied_ = {};
}

MpcController::StepResult MpcController::step(const AircraftState& x0,
                                               std::span<const ReferenceState> reference,
                                               std::span<const ObstaclePrediction> obstacles) {
  const int N = config_.horizon;
  const double T = N * config_.dt;
  const double reach = (std::abs(x0.v) + 0.5 * config_.bounds.beta_max * T) * T;
  std::vector<ObstaclePrediction> relevant;
  for (const auto& ob : obstacles) {
    double closest = kInf;
    for (int l = 0; l <= N; ++l) {
      closest = std::min(closest, (x0.position() - ob.positions[static_cast<std::size_t>(l)]).norm());
    }
    if (closest <= ob.radius + config_.cbf.d_safe + reach + 0.5) relevant.push_back(ob);
  }
  const NlpDescription nlp = build_nlp(x0, reference, relevant, last_applied_, config_);
  StepResult out;
  out.solution = solve_mpc(nlp, warm_);
  if (out.solution.ok()) {
    out.applied = out.solution.inputs.front();
    std::vector<ControlInput> shifted(out.solution.inputs.begin() + 1, out.solution.inputs.end());
    shifted.push_back(out.solution.inputs.back());
    warm_ = std::move(shifted);
  } else {
    out.applied = braking_fallback(config_.bounds);
    out.fallback = true;
    warm_.reset();
  }
  last_applied_ = out.applied;
  return out;
}

}  // namespace autotaxi
