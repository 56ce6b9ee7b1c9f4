#pragma once

#include "autotaxi/dynamics.hpp"
#include "autotaxi/trajectory.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace autotaxi {

struct CbfParams {
  double gamma = 0.1;   ///< decay rate in (0, 1]
  double d_safe = 0.1;  ///< margin added to every obstacle radius, m

  void validate() const;
  friend bool operator==(const CbfParams&, const CbfParams&) = default;
};

struct MpcWeights {
  Eigen::Matrix4d Q = Eigen::Vector4d(10.0, 10.0, 5.0, 5.0).asDiagonal();
  Eigen::Matrix2d R = Eigen::Vector2d(0.01, 0.1).asDiagonal();
  Eigen::Matrix4d P = Eigen::Vector4d(10.0, 10.0, 5.0, 5.0).asDiagonal();

  void validate() const;
  friend bool operator==(const MpcWeights& a, const MpcWeights& b) {
    return a.Q == b.Q && a.R == b.R && a.P == b.P;
  }
};

struct SqpOptions {
  int max_iters = 5;
  double step_tol = 1e-4;
  double slack_penalty = 1e4;  ///< weight on the squared CBF slacks
  /// Weight on the summed CBF slacks. The linear term keeps the slacks at
  /// zero whenever the constraints can be met, independent of how large the
  /// tracking cost of staying safe grows.
  double slack_linear_penalty = 1e4;
  friend bool operator==(const SqpOptions&, const SqpOptions&) = default;
};

struct MpcConfig {
  int horizon = 15;
  double dt = 0.1;
  double wheelbase = 0.3;
  MpcWeights weights;
  CbfParams cbf;
  InputBounds bounds;
  SpeedLimits speed_limits;
  SqpOptions sqp;

  void validate() const;
};

/// Obstacle centers at steps 0..N of the horizon.
struct ObstaclePrediction {
  std::vector<Vec2> positions;
  double radius = 0.1;
};

/// Current position followed by the constant-velocity prediction.
ObstaclePrediction predict_obstacle(const Obstacle& o, int horizon, double dt);

/// Squared-distance barrier: |p - o|^2 - (r + d_safe)^2.
double cbf_h(const AircraftState& x, const Vec2& o_pos, double r, double d_safe);

/// h_next - (1 - gamma) h_now; nonnegative when the discrete condition holds.
double cbf_residual(double h_next, double h_now, double gamma);

/// |x - x_ref|_Q^2 + |u - u_prev|_R^2 with the heading difference wrapped.
double stage_cost(const AircraftState& x, const ReferenceState& x_ref, const ControlInput& u,
                  const ControlInput& u_prev, const MpcWeights& w);

/// Sizes and data of one receding-horizon problem. States x_1..x_N are
/// shooting variables tied to the inputs by the dynamics; each CBF row
/// (step l, obstacle j) carries its own nonnegative slack.
struct NlpDescription {
  AircraftState x0;
  ControlInput u_prev;
  std::vector<ReferenceState> reference;  ///< N+1 entries
  std::vector<ObstaclePrediction> obstacles;
  MpcConfig config;

  int num_inputs = 0;          ///< 2N
  int num_states = 0;          ///< 4N shooting states
  int num_dynamics_rows = 0;   ///< 4N
  int num_cbf_rows = 0;        ///< N m
  int num_slacks = 0;          ///< N m
  int num_speed_rows = 0;      ///< 2N
  bool has_terminal_cost = true;
};

NlpDescription build_nlp(const AircraftState& x0, std::span<const ReferenceState> reference,
                         std::span<const ObstaclePrediction> obstacles,
                         const ControlInput& u_prev, const MpcConfig& config);

/// Objective of a trajectory: stage costs, terminal cost and slack penalty.
double nlp_cost(const NlpDescription& nlp, std::span<const AircraftState> states,
                std::span<const ControlInput> inputs, const Eigen::MatrixXd& slack);

enum class MpcStatus { kOk, kFailed };
const char* to_string(MpcStatus s);

struct MpcSolution {
  std::vector<ControlInput> inputs;   ///< N
  std::vector<AircraftState> states;  ///< N+1, rolled out from x0
  double cost = 0.0;
  /// Slack needed by each CBF row on the returned plan (N x m).
  Eigen::MatrixXd slack;
  /// Smallest barrier value over the plan and obstacles (+inf without any).
  double min_h = 0.0;
  int sqp_iterations = 0;
  MpcStatus status = MpcStatus::kFailed;
  std::string diagnostic;

  bool ok() const { return status == MpcStatus::kOk; }
  double max_slack() const { return slack.size() ? slack.maxCoeff() : 0.0; }
};

/// SQP over the shooting formulation. Each iteration solves a convex QP in
/// the input steps and slacks (states eliminated through the linearized
/// dynamics including shooting defects), then backtracks on an exact
/// penalty merit.
MpcSolution solve_mpc(const NlpDescription& nlp,
                      const std::optional<std::vector<ControlInput>>& warm_start = std::nullopt);

/// Reference samples at t_now + l dt, l = 0..N.
std::vector<ReferenceState> reference_window(const PolySpline& spline, double t_now, int horizon,
                                             double dt);

MpcSolution solve_mpc(const AircraftState& x0, const PolySpline& spline, double t_now,
                      std::span<const Obstacle> obstacles, const MpcConfig& config,
                      const std::optional<std::vector<ControlInput>>& warm_start = std::nullopt);

ControlInput braking_fallback(const InputBounds& bounds);

/// Per-aircraft receding-horizon controller holding its own warm start and
/// last applied input. Instances share nothing.
class MpcController {
 public:
  explicit MpcController(MpcConfig config);

  struct StepResult {
    ControlInput applied;
    MpcSolution solution;
    bool fallback = false;
  };

  /// Solves for the current state. Predictions that stay farther than the
  /// aircraft can travel over the horizon are left out of the problem.
  StepResult step(const AircraftState& x0, std::span<const ReferenceState> reference,
                  std::span<const ObstaclePrediction> obstacles);

  const MpcConfig& config() const { return config_; }
  const ControlInput& last_applied() const { return last_applied_; }
  void reset();

 private:
  MpcConfig config_;
  std::optional<std::vector<ControlInput>> warm_;
  ControlInput last_applied_;
};

}  // namespace autotaxi
