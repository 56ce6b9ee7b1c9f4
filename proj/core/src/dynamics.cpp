#include "autotaxi/dynamics.hpp"

#include "autotaxi/errors.hpp"

#include <cmath>
#include <string>

namespace autotaxi {

bool AircraftState::finite() const {
  return std::isfinite(px) && std::isfinite(py) && std::isfinite(theta) && std::isfinite(v);
}

void InputBounds::validate() const {
  if (!(phi_max > 0.0 && phi_max < std::numbers::pi / 2.0)) {
    throw InvalidArgument("phi_max must lie in (0, pi/2), got " + std::to_string(phi_max));
  }
  if (!(beta_max > 0.0)) {
    throw InvalidArgument("beta_max must be positive, got " + std::to_string(beta_max));
  }
}

void AircraftParams::validate() const {
  if (!(length > 0.0)) throw InvalidArgument("aircraft length must be positive");
  bounds.validate();
  if (!(speed_limits.v_min >= 0.0 && speed_limits.v_min <= operating_speed &&
        operating_speed <= speed_limits.v_max)) {
    throw InvalidArgument("speed limits must satisfy 0 <= v_min <= operating_speed <= v_max");
  }
  if (!(operating_speed > 0.0)) throw InvalidArgument("operating_speed must be positive");
  if (!(goal_tolerance > 0.0)) throw InvalidArgument("goal_tolerance must be positive");
}

void Obstacle::validate() const {
  if (!(radius > 0.0)) throw InvalidArgument("obstacle radius must be positive");
  if (!position.allFinite() || !velocity.allFinite()) {
    throw InvalidArgument("obstacle position and velocity must be finite");
  }
}

AircraftState step_dynamics(const AircraftState& x, const ControlInput& u, double dt, double L) {
  if (!x.finite() || !std::isfinite(u.phi) || !std::isfinite(u.beta)) {
    throw InvalidState("step_dynamics: non-finite state or input");
  }
  if (!(dt > 0.0) || !(L > 0.0)) {
    throw InvalidArgument("step_dynamics: dt and L must be positive");
  }
  AircraftState next;
  next.px = x.px + x.v * std::cos(x.theta) * dt;
  next.py = x.py + x.v * std::sin(x.theta) * dt;
  next.theta = wrap_angle(x.theta + (x.v / L) * std::tan(u.phi) * dt);
  next.v = x.v + u.beta * dt;
  return next;
}

DynamicsJacobians dynamics_jacobians(const AircraftState& x, const ControlInput& u, double dt,
                                     double L) {
  if (!x.finite() || !std::isfinite(u.phi) || !std::isfinite(u.beta)) {
    throw InvalidState("dynamics_jacobians: non-finite state or input");
  }
  if (!(dt > 0.0) || !(L > 0.0)) {
    throw InvalidArgument("dynamics_jacobians: dt and L must be positive");
  }
  const double c = std::cos(x.theta);
  const double s = std::sin(x.theta);
  const double t = std::tan(u.phi);
  const double sec2 = 1.0 + t * t;

  DynamicsJacobians J;
  J.A.setIdentity();
  J.A(0, 2) = -x.v * s * dt;
  J.A(0, 3) = c * dt;
  J.A(1, 2) = x.v * c * dt;
  J.A(1, 3) = s * dt;
  J.A(2, 3) = t / L * dt;

  J.B.setZero();
  J.B(2, 0) = x.v / L * sec2 * dt;
  J.B(3, 1) = dt;
  return J;
}

ControlInput clamp_input(const ControlInput& u, const InputBounds& bounds) {
  return {std::clamp(u.phi, -bounds.phi_max, bounds.phi_max),
          std::clamp(u.beta, -bounds.beta_max, bounds.beta_max)};
}

std::vector<Vec2> propagate_obstacle(const Obstacle& o, int steps, double dt) {
  if (steps < 0) throw InvalidArgument("propagate_obstacle: steps must be non-negative");
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int k = 1; k <= steps; ++k) {
    out.push_back(o.position + (k * dt) * o.velocity);
  }
  return out;
}

}  // namespace autotaxi
