#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace autotaxi {

using Vec2 = Eigen::Vector2d;

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  r -= kPi;
  return r == -kPi ? kPi : r;
}

/// Cumulative arc length at every vertex of a polyline (first entry is 0).
std::vector<double> cumulative_arc_length(std::span<const Vec2> polyline);

/// Point at arc length `s` along the polyline, clamped to its ends.
Vec2 point_at_arc_length(std::span<const Vec2> polyline, double s);

/// Arc-length interval [s_in, s_out] over which a polyline lies inside a
/// disk: first entry and last exit. Empty when the polyline never passes
/// through the disk interior (a tangent touch has zero length and counts as
/// a miss).
struct DiskCrossing {
  double s_in;
  double s_out;
};
std::optional<DiskCrossing> polyline_disk_crossing(std::span<const Vec2> polyline,
                                                   const Vec2& center, double radius);

}  // namespace autotaxi
