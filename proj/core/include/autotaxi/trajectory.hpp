#pragma once

#include "autotaxi/conflict.hpp"
#include "autotaxi/dynamics.hpp"
#include "autotaxi/geometry.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace autotaxi {

struct TimedWaypoint {
  Vec2 position = Vec2::Zero();
  double time = 0.0;
};

/// Derivative values imposed at the two ends of a spline. Entry k holds the
/// derivative of order k+1; orders not listed are zero.
struct BoundaryDerivatives {
  std::vector<Vec2> start;
  std::vector<Vec2> end;
};

/// Piecewise polynomial curve in the plane. Segment k is a polynomial in the
/// local time (t - knots[k]) with `poly_order` monomial coefficients per axis.
class PolySpline {
 public:
  PolySpline() = default;
  PolySpline(std::vector<double> knots, std::vector<Eigen::VectorXd> coeff_x,
             std::vector<Eigen::VectorXd> coeff_y, int poly_order, int snap_order);

  int num_segments() const { return static_cast<int>(knots_.size()) - 1; }
  int poly_order() const { return poly_order_; }
  int snap_order() const { return snap_order_; }
  const std::vector<double>& knots() const { return knots_; }
  double t_first() const { return knots_.front(); }
  double t_last() const { return knots_.back(); }
  bool empty() const { return knots_.size() < 2; }

  /// Coefficients of segment k for axis 0 (x) or 1 (y), lowest degree first.
  const Eigen::VectorXd& coefficients(int axis, int segment) const;

  /// Segment containing t (clamped to the spline's time range).
  int segment_index(double t) const;

  /// Derivative of the given order at t; t is clamped to [t_first, t_last].
  Vec2 derivative(double t, int order) const;
  Vec2 position(double t) const { return derivative(t, 0); }

  /// Integral of the squared snap_order-th derivative, summed over axes.
  double cost() const { return cost_; }
  /// KKT residual of the solve that produced this spline (0 if built by hand).
  double kkt_residual() const { return kkt_residual_; }
  void set_solve_info(double cost, double kkt_residual) {
    cost_ = cost;
    kkt_residual_ = kkt_residual;
  }

 private:
  std::vector<double> knots_;
  std::vector<Eigen::VectorXd> cx_;
  std::vector<Eigen::VectorXd> cy_;
  int poly_order_ = 0;
  int snap_order_ = 0;
  double cost_ = 0.0;
  double kkt_residual_ = 0.0;
};

/// Gram matrix H with a'Ha = integral over [0, T] of the squared r-th
/// derivative of sum_i a_i t^i (i = 0..poly_order-1).
Eigen::MatrixXd snap_cost_matrix(double segment_duration, int poly_order, int snap_order);

/// Energy of the r-th derivative summed over all segments and both axes,
/// evaluated from the coefficients with snap_cost_matrix.
double spline_snap_energy(const PolySpline& spline);

/// Minimum-energy spline through timed waypoints. Interior derivatives of
/// order 1..r-1 are continuous and otherwise free.
PolySpline min_snap(std::span<const TimedWaypoint> waypoints,
                    const BoundaryDerivatives& boundary = {}, int poly_order = 8,
                    int snap_order = 4);

/// Reference state shares the aircraft state layout.
using ReferenceState = AircraftState;

/// Speeds below this are treated as stationary when deriving a heading.
inline constexpr double kHeadingSpeedEps = 1e-4;

ReferenceState sample_reference(const PolySpline& spline, double t);

/// Entry and exit times pinned for one zone along a route.
struct ZonePin {
  ConflictZone zone;
  double t_in = 0.0;
  double t_out = 0.0;
};

struct ReferenceOptions {
  int poly_order = 8;
  int snap_order = 4;
  /// Speed imposed along the first/last route segment; defaults to the
  /// operating speed when unset.
  std::optional<double> start_speed;
  std::optional<double> end_speed;
};

/// Timed waypoints for a route: vertices timed by cumulative arc length at
/// the operating speed, with zone entry/exit points pinned to the given
/// times. Throws InvalidArgument when a pinned time is earlier than the
/// route can reach it.
std::vector<TimedWaypoint> reference_waypoints(std::span<const Vec2> route,
                                               std::span<const ZonePin> pins,
                                               double operating_speed, double t_start);

PolySpline build_reference(std::span<const Vec2> route, std::span<const ZonePin> pins,
                           double operating_speed, double t_start,
                           const ReferenceOptions& options = {});

}  // namespace autotaxi
