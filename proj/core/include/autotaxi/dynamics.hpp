#pragma once

#include "autotaxi/geometry.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <numbers>
#include <vector>

namespace autotaxi {

/// Planar non-holonomic aircraft state.
struct AircraftState {
  double px = 0.0;     ///< m
  double py = 0.0;     ///< m
  double theta = 0.0;  ///< rad, kept in (-pi, pi]
  double v = 0.0;      ///< forward speed, m/s

  Eigen::Vector4d vec() const { return {px, py, theta, v}; }
  Vec2 position() const { return {px, py}; }
  static AircraftState from_vec(const Eigen::Vector4d& x) { return {x(0), x(1), x(2), x(3)}; }
  bool finite() const;

  friend bool operator==(const AircraftState&, const AircraftState&) = default;
};

struct ControlInput {
  double phi = 0.0;   ///< rudder deflection, rad
  double beta = 0.0;  ///< throttle as longitudinal acceleration, m/s^2

  Eigen::Vector2d vec() const { return {phi, beta}; }
  static ControlInput from_vec(const Eigen::Vector2d& u) { return {u(0), u(1)}; }

  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

struct InputBounds {
  double phi_max = std::numbers::pi / 6.0;
  double beta_max = 1.0;

  void validate() const;
  friend bool operator==(const InputBounds&, const InputBounds&) = default;
};

struct SpeedLimits {
  double v_min = 0.0;
  double v_max = 2.0;

  double clamp(double v) const { return std::clamp(v, v_min, v_max); }
  friend bool operator==(const SpeedLimits&, const SpeedLimits&) = default;
};

struct AircraftParams {
  double length = 0.3;  ///< wheelbase L, m
  InputBounds bounds;
  SpeedLimits speed_limits;
  double operating_speed = 0.5;
  int priority = 0;  ///< smaller value = higher priority
  double goal_tolerance = 0.2;

  /// Radius of the disk other aircraft treat this one as.
  double body_radius() const { return 0.5 * length; }
  void validate() const;
  friend bool operator==(const AircraftParams&, const AircraftParams&) = default;
};

/// Circular obstacle moving at constant velocity.
struct Obstacle {
  Vec2 position = Vec2::Zero();
  double radius = 0.1;
  Vec2 velocity = Vec2::Zero();

  void validate() const;
  friend bool operator==(const Obstacle& a, const Obstacle& b) {
    return a.position == b.position && a.radius == b.radius && a.velocity == b.velocity;
  }
};

/// One explicit-Euler step of the kinematic model. Throws InvalidState on
/// non-finite input and InvalidArgument when dt or L is not positive.
AircraftState step_dynamics(const AircraftState& x, const ControlInput& u, double dt, double L);

struct DynamicsJacobians {
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 2> B;
};

/// Analytic Jacobians of step_dynamics (heading wrap ignored).
DynamicsJacobians dynamics_jacobians(const AircraftState& x, const ControlInput& u, double dt,
                                     double L);

ControlInput clamp_input(const ControlInput& u, const InputBounds& bounds);

/// Positions o_1..o_steps of a constant-velocity obstacle.
std::vector<Vec2> propagate_obstacle(const Obstacle& o, int steps, double dt);

}  // namespace autotaxi
